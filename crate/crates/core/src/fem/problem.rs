//! Coupled two-field boundary-value problem: schedules, degrees of freedom
//! and field histories.
//!
//! Global dof ordering: displacement dofs first (`3·node + component`), then
//! one temperature dof per node (`3·N + node`). The thermal residual block is
//! stored with its Δt conditioning factor already applied.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::Real;

/// Per-step boundary data and loads. Displacement components may be
/// constrained individually (`null` leaves a component free).
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct StepSchedule {
    /// Time increment of this step, s.
    pub dt_s: Real,
    /// Node set → prescribed displacement per component, mm.
    #[serde(default)]
    pub dirichlet_u: BTreeMap<String, [Option<Real>; 3]>,
    /// Node set → prescribed temperature, K.
    #[serde(default)]
    pub dirichlet_t: BTreeMap<String, Real>,
    /// Face set → traction vector, N/mm².
    #[serde(default)]
    pub tractions: BTreeMap<String, [Real; 3]>,
    /// Face set → prescribed inward heat flux, mW/mm².
    #[serde(default)]
    pub fluxes: BTreeMap<String, Real>,
    /// Referential body force, N/mm³.
    #[serde(default)]
    pub body_force: [Real; 3],
    /// Volumetric heat source, mW/mm³.
    #[serde(default)]
    pub heat_source: Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialState {
    /// Homogeneous initial temperature, K.
    #[serde(rename = "T0_K")]
    pub t0_k: Real,
}

/// Mesh plus time-series boundary conditions for the coupled problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FemProblem {
    #[serde(flatten)]
    pub mesh: Mesh,
    pub initial: InitialState,
    pub steps: Vec<StepSchedule>,
}

impl FemProblem {
    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if !(self.initial.t0_k > 0.0) {
            return Err(Error::Mesh("initial temperature must be positive".into()));
        }
        for (k, step) in self.steps.iter().enumerate() {
            if !(step.dt_s > 0.0) {
                return Err(Error::Mesh(format!("step {k}: dt must be positive")));
            }
            for name in step
                .dirichlet_u
                .keys()
                .chain(step.dirichlet_t.keys())
            {
                if !self.mesh.node_sets.contains_key(name) {
                    return Err(Error::Mesh(format!("step {k}: unknown node set '{name}'")));
                }
            }
            for name in step.tractions.keys().chain(step.fluxes.keys()) {
                if !self.mesh.face_sets.contains_key(name) {
                    return Err(Error::Mesh(format!("step {k}: unknown face set '{name}'")));
                }
            }
            for t in step.dirichlet_t.values() {
                if !(*t > 0.0) {
                    return Err(Error::Mesh(format!(
                        "step {k}: non-positive Dirichlet temperature"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_udof(&self) -> usize {
        3 * self.mesh.n_nodes()
    }

    pub fn n_tdof(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Largest prescribed mechanical load magnitude over all steps
    /// (tractions and body forces).
    pub fn mech_load_scale(&self) -> Real {
        let mut m: Real = 0.0;
        for s in &self.steps {
            for t in s.tractions.values() {
                for &c in t {
                    m = m.max(c.abs());
                }
            }
            for &c in &s.body_force {
                m = m.max(c.abs());
            }
        }
        m
    }

    /// Largest prescribed thermal load magnitude (fluxes and sources).
    pub fn thermal_load_scale(&self) -> Real {
        let mut m: Real = 0.0;
        for s in &self.steps {
            for q in s.fluxes.values() {
                m = m.max(q.abs());
            }
            m = m.max(s.heat_source.abs());
        }
        m
    }

    /// Dirichlet masks and prescribed values for one step.
    /// A dof is Dirichlet or free, never both.
    pub fn dirichlet_at(&self, step: usize) -> (Vec<Option<Real>>, Vec<Option<Real>>) {
        let n = self.mesh.n_nodes();
        let mut du: Vec<Option<Real>> = vec![None; 3 * n];
        let mut dt: Vec<Option<Real>> = vec![None; n];
        let s = &self.steps[step];
        for (set, comps) in &s.dirichlet_u {
            for &node in &self.mesh.node_sets[set] {
                for c in 0..3 {
                    if let Some(v) = comps[c] {
                        du[3 * node + c] = Some(v);
                    }
                }
            }
        }
        for (set, &temp) in &s.dirichlet_t {
            for &node in &self.mesh.node_sets[set] {
                dt[node] = Some(temp);
            }
        }
        (du, dt)
    }
}

/// Nodal fields and per-quadrature-point entropy over the simulated steps.
/// Index 0 is the initial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHistory {
    /// Per step: flat displacement vector (3N), mm.
    pub u: Vec<Vec<Real>>,
    /// Per step: nodal temperatures (N), K.
    pub t: Vec<Vec<Real>>,
    /// Per step: entropy at the 8 Gauss points of each element
    /// (`element·8 + qp`).
    pub entropy: Vec<Vec<Real>>,
    /// Δt of the transition into each step (index 0 unused, 0.0).
    pub dt: Vec<Real>,
}

impl FieldHistory {
    pub fn initial(problem: &FemProblem) -> Self {
        let n = problem.mesh.n_nodes();
        FieldHistory {
            u: vec![vec![0.0; 3 * n]],
            t: vec![vec![problem.initial.t0_k; n]],
            entropy: vec![vec![0.0; problem.mesh.n_elements() * 8]],
            dt: vec![0.0],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.u.len()
    }
}

/// Residual of the coupled system with its Dirichlet/free partition.
/// Thermal rows carry the Δt conditioning factor.
#[derive(Debug, Clone)]
pub struct ResidualVector {
    /// Mechanical block, 3N rows.
    pub r_u: Vec<Real>,
    /// Thermal block, N rows, scaled by Δt.
    pub r_t: Vec<Real>,
    pub dirichlet_u: Vec<bool>,
    pub dirichlet_t: Vec<bool>,
}

impl ResidualVector {
    pub fn zeros(n_nodes: usize) -> Self {
        ResidualVector {
            r_u: vec![0.0; 3 * n_nodes],
            r_t: vec![0.0; n_nodes],
            dirichlet_u: vec![false; 3 * n_nodes],
            dirichlet_t: vec![false; n_nodes],
        }
    }

    /// Max |row| over the free (non-Dirichlet) partition.
    pub fn free_norm_inf(&self) -> Real {
        let mut m: Real = 0.0;
        for (r, &d) in self.r_u.iter().zip(&self.dirichlet_u) {
            if !d {
                m = m.max(r.abs());
            }
        }
        for (r, &d) in self.r_t.iter().zip(&self.dirichlet_t) {
            if !d {
                m = m.max(r.abs());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::box_grid;

    fn bar_problem() -> FemProblem {
        let mesh = box_grid(4, 1, 1, 0.25, 0.25, 0.25, |_, _, _| false);
        let mut step = StepSchedule {
            dt_s: 0.1,
            ..Default::default()
        };
        step.dirichlet_u
            .insert("all".into(), [Some(0.0), Some(0.0), Some(0.0)]);
        step.dirichlet_t.insert("xmin".into(), 293.15);
        step.dirichlet_t.insert("xmax".into(), 303.15);
        FemProblem {
            mesh,
            initial: InitialState { t0_k: 293.15 },
            steps: vec![step],
        }
    }

    #[test]
    fn masks_partition_dofs() {
        let p = bar_problem();
        p.validate().unwrap();
        let (du, dt) = p.dirichlet_at(0);
        assert!(du.iter().all(|d| d.is_some()), "rigid problem fixes all u");
        let fixed_t = dt.iter().filter(|d| d.is_some()).count();
        assert_eq!(fixed_t, 8, "both end faces have 4 nodes each");
    }

    #[test]
    fn schedule_json_round_trip() {
        let p = bar_problem();
        let text = serde_json::to_string_pretty(&p).unwrap();
        let back: FemProblem = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(p.steps.len(), back.steps.len());
        assert_eq!(
            p.steps[0].dirichlet_t["xmax"],
            back.steps[0].dirichlet_t["xmax"]
        );
    }

    #[test]
    fn bad_references_rejected() {
        let mut p = bar_problem();
        p.steps[0].dirichlet_t.insert("nope".into(), 300.0);
        assert!(p.validate().is_err());
    }
}
