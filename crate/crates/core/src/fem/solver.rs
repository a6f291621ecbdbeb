//! Forward Newton solver, reaction extraction and field replay.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::model::ConstitutiveModel;
use crate::fem::problem::{FemProblem, FieldHistory, ResidualVector, StepSchedule};
use crate::fem::residual::Assembler;
use crate::{Real, Tensor2, Vec3};

/// Reactions of one node set: resultant force (N) and heat flow (mW,
/// positive into the body).
#[derive(Debug, Clone, Copy, Default)]
pub struct Reaction {
    pub force: Vec3,
    pub heat_flow: Real,
}

/// Solver options. `tol_rel` scales the problem load scale into the residual
/// tolerance; `max_bisections` bounds the time-step rescue.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol_rel: Real,
    pub max_newton: usize,
    pub max_bisections: usize,
    pub fd_step_u: Real,
    pub fd_step_t: Real,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_rel: 1e-9,
            max_newton: 25,
            max_bisections: 4,
            fd_step_u: 1e-7,
            fd_step_t: 1e-5,
        }
    }
}

/// Forward-solve output: fields per step and reactions per step and node set.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub history: FieldHistory,
    /// Per step (1..): node set → reaction.
    pub reactions: Vec<BTreeMap<String, Reaction>>,
}

/// Sum of residual rows over a node set: the discrete equivalent of the
/// boundary surface integrals. The thermal row sum is divided by Δt to undo
/// the conditioning scale.
pub fn reactions(
    problem: &FemProblem,
    r: &ResidualVector,
    dt: Real,
) -> BTreeMap<String, Reaction> {
    let mut out = BTreeMap::new();
    for (name, set) in &problem.mesh.node_sets {
        let mut force = Vec3::zero();
        let mut heat = 0.0;
        for &node in set {
            for i in 0..3 {
                force.0[i] += r.r_u[3 * node + i];
            }
            heat += r.r_t[node] / dt;
        }
        out.insert(name.clone(), Reaction {
            force,
            heat_flow: heat,
        });
    }
    out
}

fn apply_dirichlet(u: &mut [Real], t: &mut [Real], du: &[Option<Real>], dt: &[Option<Real>]) {
    for (x, d) in u.iter_mut().zip(du) {
        if let Some(v) = d {
            *x = *v;
        }
    }
    for (x, d) in t.iter_mut().zip(dt) {
        if let Some(v) = d {
            *x = *v;
        }
    }
}

struct StepTarget<'a> {
    sched: &'a StepSchedule,
    du: Vec<Option<Real>>,
    dt_bc: Vec<Option<Real>>,
}

/// One Newton solve of the coupled system for a (sub-)step.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    asm: &Assembler,
    model: &dyn ConstitutiveModel,
    u_n: &[Real],
    t_n: &[Real],
    s_n: &[Real],
    dt: Real,
    target: &StepTarget,
    tol: Real,
    opts: &SolveOptions,
) -> Result<(Vec<Real>, Vec<Real>, Vec<Real>, ResidualVector)> {
    let n_nodes = asm.problem.mesh.n_nodes();
    let mut worker = model.worker();
    let mut u = u_n.to_vec();
    let mut t = t_n.to_vec();
    apply_dirichlet(&mut u, &mut t, &target.du, &target.dt_bc);

    // Free dof indexing: mechanical then thermal.
    let free_u: Vec<usize> = (0..3 * n_nodes).filter(|&d| target.du[d].is_none()).collect();
    let free_t: Vec<usize> = (0..n_nodes).filter(|&d| target.dt_bc[d].is_none()).collect();
    let n_free = free_u.len() + free_t.len();

    let mut best = Real::INFINITY;
    for _iter in 0..opts.max_newton {
        let (r, s_new) = asm.assemble(
            &mut *worker,
            &u,
            &t,
            s_n,
            dt,
            target.sched,
            &target.du,
            &target.dt_bc,
        )?;
        let rn = r.free_norm_inf();
        if !rn.is_finite() {
            return Err(Error::NonFinite("residual"));
        }
        if rn < tol {
            return Ok((u, t, s_new, r));
        }
        if rn > 1e4 * best.max(tol) {
            return Err(Error::Convergence {
                solver: "newton (diverging)",
                iterations: _iter,
                residual: rn,
            });
        }
        best = best.min(rn);
        if n_free == 0 {
            // Fully prescribed problem: the residual on free rows is empty.
            return Ok((u, t, s_new, r));
        }

        // FD tangent, element by element.
        let mut k = DMatrix::<Real>::zeros(n_free, n_free);
        let mut col_of = vec![usize::MAX; 4 * n_nodes];
        for (c, &d) in free_u.iter().enumerate() {
            col_of[d] = c;
        }
        for (c, &d) in free_t.iter().enumerate() {
            col_of[3 * n_nodes + d] = free_u.len() + c;
        }
        for (e, conn) in asm.problem.mesh.hex8.iter().enumerate() {
            let mut u_e = [0.0; 24];
            let mut t_e = [0.0; 8];
            let mut s_e = [0.0; 8];
            for a in 0..8 {
                for i in 0..3 {
                    u_e[3 * a + i] = u[3 * conn[a] + i];
                }
                t_e[a] = t[conn[a]];
                s_e[a] = s_n[8 * e + a];
            }
            // Element dof d: 0..24 displacement, 24..32 temperature.
            for d in 0..32 {
                let gcol = if d < 24 {
                    col_of[3 * conn[d / 3] + d % 3]
                } else {
                    col_of[3 * n_nodes + conn[d - 24]]
                };
                if gcol == usize::MAX {
                    continue;
                }
                let h = if d < 24 { opts.fd_step_u } else { opts.fd_step_t };
                let (mut up, mut tp) = (u_e, t_e);
                let (mut um, mut tm) = (u_e, t_e);
                if d < 24 {
                    up[d] += h;
                    um[d] -= h;
                } else {
                    tp[d - 24] += h;
                    tm[d - 24] -= h;
                }
                let (rup, rtp, _) = asm.element_internal(&mut *worker, e, &up, &tp, &s_e, dt)?;
                let (rum, rtm, _) = asm.element_internal(&mut *worker, e, &um, &tm, &s_e, dt)?;
                for a in 0..8 {
                    for i in 0..3 {
                        let grow = col_of[3 * conn[a] + i];
                        if grow != usize::MAX {
                            k[(grow, gcol)] += (rup[3 * a + i] - rum[3 * a + i]) / (2.0 * h);
                        }
                    }
                    let grow = col_of[3 * n_nodes + conn[a]];
                    if grow != usize::MAX {
                        // Thermal rows carry the Δt conditioning.
                        k[(grow, gcol)] += dt * (rtp[a] - rtm[a]) / (2.0 * h);
                    }
                }
            }
        }

        let mut rhs = DVector::<Real>::zeros(n_free);
        for (c, &d) in free_u.iter().enumerate() {
            rhs[c] = -r.r_u[d];
        }
        for (c, &d) in free_t.iter().enumerate() {
            rhs[free_u.len() + c] = -r.r_t[d];
        }
        let lu = k.lu();
        let dx = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Other("singular tangent in Newton solve".into()))?;

        // Keep temperatures physical: backtrack the update if needed.
        let mut scale: Real = 1.0;
        for (c, &d) in free_t.iter().enumerate() {
            let tn = t[d] + dx[free_u.len() + c];
            if tn <= 1.0 {
                scale = scale.min(0.5 * (1.0 - t[d]).abs() / dx[free_u.len() + c].abs().max(1e-30));
            }
            let _ = tn;
        }
        for (c, &d) in free_u.iter().enumerate() {
            u[d] += scale * dx[c];
        }
        for (c, &d) in free_t.iter().enumerate() {
            t[d] += scale * dx[free_u.len() + c];
        }
    }
    Err(Error::Convergence {
        solver: "newton",
        iterations: opts.max_newton,
        residual: best,
    })
}

/// Linear interpolation of boundary data between the state at the start of a
/// step and the step's target values.
fn lerp_target<'a>(
    problem: &FemProblem,
    step: usize,
    u_start: &[Real],
    t_start: &[Real],
    prev_sched: Option<&StepSchedule>,
    frac: Real,
    sched_storage: &'a mut StepSchedule,
) -> StepTarget<'a> {
    let (du_full, dt_full) = problem.dirichlet_at(step);
    let target = &problem.steps[step];
    let mut du = vec![None; du_full.len()];
    let mut dt_bc = vec![None; dt_full.len()];
    for (i, d) in du_full.iter().enumerate() {
        if let Some(v) = d {
            du[i] = Some(u_start[i] + frac * (v - u_start[i]));
        }
    }
    for (i, d) in dt_full.iter().enumerate() {
        if let Some(v) = d {
            dt_bc[i] = Some(t_start[i] + frac * (v - t_start[i]));
        }
    }
    // Loads: lerp from the previous step's values (zero before step 0).
    let mut s = target.clone();
    let lerp = |prev: Real, tgt: Real| prev + frac * (tgt - prev);
    for (set, t) in s.tractions.iter_mut() {
        let prev = prev_sched
            .and_then(|p| p.tractions.get(set))
            .copied()
            .unwrap_or([0.0; 3]);
        for i in 0..3 {
            t[i] = lerp(prev[i], t[i]);
        }
    }
    for (set, q) in s.fluxes.iter_mut() {
        let prev = prev_sched.and_then(|p| p.fluxes.get(set)).copied().unwrap_or(0.0);
        *q = lerp(prev, *q);
    }
    for i in 0..3 {
        let prev = prev_sched.map(|p| p.body_force[i]).unwrap_or(0.0);
        s.body_force[i] = lerp(prev, s.body_force[i]);
    }
    let prev = prev_sched.map(|p| p.heat_source).unwrap_or(0.0);
    s.heat_source = lerp(prev, s.heat_source);
    *sched_storage = s;
    StepTarget {
        sched: sched_storage,
        du,
        dt_bc,
    }
}

/// Implicit time stepping of the coupled problem with Newton iteration per
/// step and time-step bisection rescue (up to `max_bisections` halvings).
pub fn forward_solve(
    problem: &FemProblem,
    model: &dyn ConstitutiveModel,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let asm = Assembler::new(problem)?;
    let mut history = FieldHistory::initial(problem);
    // Initial entropy from the state law at (F = I, T0).
    {
        let mut worker = model.worker();
        let s0 = worker.entropy(&Tensor2::identity(), problem.initial.t0_k, 0.0)?;
        for s in history.entropy[0].iter_mut() {
            *s = s0;
        }
    }
    let load_scale = problem
        .mech_load_scale()
        .max(problem.thermal_load_scale())
        .max(1.0);
    let tol = opts.tol_rel * load_scale;
    let mut reactions_out = Vec::new();

    for step in 0..problem.steps.len() {
        let dt_full = problem.steps[step].dt_s;
        // Advance by fractions of the step, bisecting on failure.
        let u_start = history.u.last().unwrap().clone();
        let t_start = history.t.last().unwrap().clone();
        let mut u_cur = u_start.clone();
        let mut t_cur = t_start.clone();
        let mut s_cur = history.entropy.last().unwrap().clone();
        let mut frac_done: Real = 0.0;
        let mut frac_step: Real = 1.0;
        let mut bisections = 0usize;
        let mut last_residual = None;
        while frac_done < 1.0 - 1e-12 {
            let frac_target = (frac_done + frac_step).min(1.0);
            let mut sched_storage = StepSchedule::default();
            let target = lerp_target(
                problem,
                step,
                &u_start,
                &t_start,
                if step > 0 { Some(&problem.steps[step - 1]) } else { None },
                frac_target,
                &mut sched_storage,
            );
            let dt_sub = dt_full * (frac_target - frac_done);
            match newton_step(&asm, model, &u_cur, &t_cur, &s_cur, dt_sub, &target, tol, opts) {
                Ok((u, t, s, r)) => {
                    u_cur = u;
                    t_cur = t;
                    s_cur = s;
                    last_residual = Some(r);
                    frac_done = frac_target;
                }
                Err(e) => {
                    bisections += 1;
                    if bisections > opts.max_bisections {
                        return Err(Error::Other(format!(
                            "step {step} failed after {bisections} bisections: {e}"
                        )));
                    }
                    frac_step *= 0.5;
                    log::warn!("step {step}: bisecting time step ({e})");
                }
            }
        }
        let r = last_residual.expect("at least one sub-step solved");
        reactions_out.push(reactions(problem, &r, dt_full * frac_step.min(1.0)));
        history.u.push(u_cur);
        history.t.push(t_cur);
        history.entropy.push(s_cur);
        history.dt.push(dt_full);
        log::info!(
            "step {step}: done (‖r‖∞ = {:.3e})",
            r.free_norm_inf()
        );
    }
    Ok(SolveResult {
        history,
        reactions: reactions_out,
    })
}

/// Replays prescribed fields through a constitutive model: assembles the
/// residual at every stored step (tracking the model's own entropy history)
/// and extracts reactions. This is the constitutive-level parity check used
/// to compare a learned model against reference data.
pub fn replay_reactions(
    problem: &FemProblem,
    model: &dyn ConstitutiveModel,
    history: &FieldHistory,
) -> Result<Vec<BTreeMap<String, Reaction>>> {
    let asm = Assembler::new(problem)?;
    let mut worker = model.worker();
    // Entropy at the initial data state.
    let n_qp = problem.mesh.n_elements() * 8;
    let mut s_prev = vec![0.0; n_qp];
    {
        // Fields at step 0 are homogeneous (u = 0, T = T0).
        let s0 = worker.entropy(&Tensor2::identity(), problem.initial.t0_k, 0.0)?;
        for s in s_prev.iter_mut() {
            *s = s0;
        }
    }
    let mut out = Vec::new();
    for step in 1..history.n_steps() {
        let sched = &problem.steps[step - 1];
        let (du, dt_bc) = problem.dirichlet_at(step - 1);
        let (r, s_new) = asm.assemble(
            &mut *worker,
            &history.u[step],
            &history.t[step],
            &s_prev,
            history.dt[step],
            sched,
            &du,
            &dt_bc,
        )?;
        out.push(reactions(problem, &r, history.dt[step]));
        s_prev = s_new;
    }
    Ok(out)
}
