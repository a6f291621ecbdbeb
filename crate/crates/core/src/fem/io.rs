//! Field and reaction output as CSV files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::fem::problem::{FemProblem, FieldHistory};
use crate::fem::solver::Reaction;
use crate::Real;

/// One CSV per step: `node,x,y,z,ux,uy,uz,T`.
pub fn write_field_csvs(dir: &Path, problem: &FemProblem, history: &FieldHistory) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for step in 0..history.n_steps() {
        let mut f = std::fs::File::create(dir.join(format!("step_{step:04}.csv")))?;
        writeln!(f, "node,x,y,z,ux,uy,uz,T")?;
        for (n, x) in problem.mesh.nodes.iter().enumerate() {
            let u = &history.u[step];
            writeln!(
                f,
                "{n},{},{},{},{},{},{},{}",
                x[0],
                x[1],
                x[2],
                u[3 * n],
                u[3 * n + 1],
                u[3 * n + 2],
                history.t[step][n]
            )?;
        }
    }
    Ok(())
}

/// Reaction time series: `step,time,set,Fx,Fy,Fz,heat_flow`.
pub fn write_reactions_csv(
    path: &Path,
    dts: &[Real],
    reactions: &[BTreeMap<String, Reaction>],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "step,time,set,Fx,Fy,Fz,heat_flow")?;
    let mut time = 0.0;
    for (k, step_reactions) in reactions.iter().enumerate() {
        time += dts.get(k + 1).copied().unwrap_or(0.0);
        for (set, r) in step_reactions {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                k + 1,
                time,
                set,
                r.force.0[0],
                r.force.0[1],
                r.force.0[2],
                r.heat_flow
            )?;
        }
    }
    Ok(())
}
