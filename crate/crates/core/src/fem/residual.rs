//! Element residuals and global assembly for the coupled problem.
//!
//! Internal virtual work per element, 2×2×2 Gauss:
//!
//! ```text
//! r_u[a,i] = Σ_qp w·detJ · P_ij · ∂N_a/∂X_j
//! r_T[a]   = Σ_qp w·detJ · ( T·ṡ·N_a − q·Grad N_a )
//! ```
//!
//! with all constitutive quantities at the trial step, `ṡ` by backward Euler
//! and the temperature multiplying `ṡ` taken from the state law `∂e/∂s`.
//! External work (dead loads in the reference configuration) is subtracted
//! during assembly; thermal rows are scaled by Δt afterwards.

use crate::error::Result;
use crate::fem::model::ConstitutiveWorker;
use crate::fem::problem::{FemProblem, ResidualVector, StepSchedule};
use crate::fem::shape::{face_gauss_points, gauss_points, shape_eval, FACES};
use crate::kinematics::thermal_gradient;
use crate::{Real, Tensor2, Vec3};

/// Precomputed isoparametric geometry of one element.
#[derive(Debug, Clone)]
pub struct ElemGeom {
    /// Material shape-function gradients per Gauss point and node.
    pub grad_n: [[Vec3; 8]; 8],
    /// Shape values per Gauss point and node.
    pub n: [[Real; 8]; 8],
    /// Jacobian determinant per Gauss point (weight 1 each).
    pub det_j: [Real; 8],
}

/// Assembly helper holding per-element geometry for a fixed mesh.
pub struct Assembler<'p> {
    pub problem: &'p FemProblem,
    pub geoms: Vec<ElemGeom>,
}

impl<'p> Assembler<'p> {
    pub fn new(problem: &'p FemProblem) -> Result<Self> {
        problem.validate()?;
        let mut geoms = Vec::with_capacity(problem.mesh.n_elements());
        for conn in &problem.mesh.hex8 {
            let mut geom = ElemGeom {
                grad_n: [[Vec3::zero(); 8]; 8],
                n: [[0.0; 8]; 8],
                det_j: [0.0; 8],
            };
            for (q, xi) in gauss_points().into_iter().enumerate() {
                let (n, dn) = shape_eval(xi);
                let mut jac = Tensor2::zero();
                for a in 0..8 {
                    let x = problem.mesh.nodes[conn[a]];
                    for i in 0..3 {
                        for k in 0..3 {
                            jac.0[i][k] += x[i] * dn[a][k];
                        }
                    }
                }
                let det = jac.det();
                let jac_inv_t = jac.inverse().transpose();
                for a in 0..8 {
                    geom.grad_n[q][a] = jac_inv_t.matvec(&Vec3(dn[a]));
                }
                geom.n[q] = n;
                geom.det_j[q] = det;
            }
            geoms.push(geom);
        }
        Ok(Assembler { problem, geoms })
    }

    /// Internal residual of one element at the trial nodal state.
    ///
    /// `u_e`/`t_e` are element nodal values at the trial step, `s_n` the
    /// converged quadrature entropy of the previous step. Returns the
    /// mechanical and (unscaled) thermal row blocks plus the trial entropy.
    #[allow(clippy::too_many_arguments)]
    pub fn element_internal(
        &self,
        worker: &mut dyn ConstitutiveWorker,
        elem: usize,
        u_e: &[Real; 24],
        t_e: &[Real; 8],
        s_n: &[Real; 8],
        dt: Real,
    ) -> Result<([Real; 24], [Real; 8], [Real; 8])> {
        let geom = &self.geoms[elem];
        let mut r_u = [0.0; 24];
        let mut r_t = [0.0; 8];
        let mut s_new = [0.0; 8];
        for q in 0..8 {
            let w = geom.det_j[q];
            // Deformation gradient and temperature interpolation.
            let mut f = Tensor2::identity();
            let mut temp = 0.0;
            let mut grad_t = Vec3::zero();
            for a in 0..8 {
                let gn = geom.grad_n[q][a];
                for i in 0..3 {
                    for j in 0..3 {
                        f.0[i][j] += u_e[3 * a + i] * gn.0[j];
                    }
                }
                temp += geom.n[q][a] * t_e[a];
                grad_t = grad_t.add(&gn.scale(t_e[a]));
            }
            let g = thermal_gradient(&grad_t, temp)?;
            let s = worker.entropy(&f, temp, s_n[q])?;
            let out = worker.state(&f, s, &g)?;
            s_new[q] = s;
            let s_dot = (s - s_n[q]) / dt;
            for a in 0..8 {
                let gn = geom.grad_n[q][a];
                for i in 0..3 {
                    r_u[3 * a + i] +=
                        w * (out.piola.0[i][0] * gn.0[0]
                            + out.piola.0[i][1] * gn.0[1]
                            + out.piola.0[i][2] * gn.0[2]);
                }
                r_t[a] += w * (out.temperature * s_dot * geom.n[q][a] - out.q.dot(&gn));
            }
        }
        Ok((r_u, r_t, s_new))
    }

    /// Subtracts the external virtual work of `sched` (tractions, surface
    /// fluxes, body force, heat source) from the residual blocks.
    pub fn subtract_external(&self, r: &mut ResidualVector, sched: &StepSchedule) {
        let mesh = &self.problem.mesh;
        // Volume loads.
        let has_body = sched.body_force.iter().any(|&b| b != 0.0);
        if has_body || sched.heat_source != 0.0 {
            for (e, conn) in mesh.hex8.iter().enumerate() {
                let geom = &self.geoms[e];
                for q in 0..8 {
                    let w = geom.det_j[q];
                    for a in 0..8 {
                        let na = geom.n[q][a];
                        for i in 0..3 {
                            r.r_u[3 * conn[a] + i] -= w * na * sched.body_force[i];
                        }
                        r.r_t[conn[a]] -= w * na * sched.heat_source;
                    }
                }
            }
        }
        // Surface loads on reference faces (dead loads).
        let mut surface = |set: &str, mut apply: Box<dyn FnMut(&mut ResidualVector, usize, Real, &[Real; 8]) + '_>| {
            for &(e, face) in &mesh.face_sets[set] {
                let conn = &mesh.hex8[e];
                let (pts, axes) = face_gauss_points(face);
                for xi in pts {
                    let (n, dn) = shape_eval(xi);
                    let mut t1 = Vec3::zero();
                    let mut t2 = Vec3::zero();
                    for a in 0..8 {
                        let x = Vec3(mesh.nodes[conn[a]]);
                        t1 = t1.add(&x.scale(dn[a][axes[0]]));
                        t2 = t2.add(&x.scale(dn[a][axes[1]]));
                    }
                    let da = t1.cross(&t2).norm();
                    for a in 0..8 {
                        if n[a] != 0.0 {
                            apply(r, conn[a], n[a] * da, &n);
                        }
                    }
                }
            }
        };
        for (set, t) in &sched.tractions {
            let tv = *t;
            surface(
                set,
                Box::new(move |r, node, nda, _| {
                    for i in 0..3 {
                        r.r_u[3 * node + i] -= nda * tv[i];
                    }
                }),
            );
        }
        for (set, &q) in &sched.fluxes {
            surface(
                set,
                Box::new(move |r, node, nda, _| {
                    r.r_t[node] -= nda * q;
                }),
            );
        }
    }

    /// Full residual at trial fields `(u, t)` for the transition with time
    /// increment `dt` under schedule `sched` and Dirichlet masks.
    /// Returns the residual (thermal rows Δt-scaled) and the trial entropy.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        &self,
        worker: &mut dyn ConstitutiveWorker,
        u: &[Real],
        t: &[Real],
        s_n: &[Real],
        dt: Real,
        sched: &StepSchedule,
        dirichlet_u: &[Option<Real>],
        dirichlet_t: &[Option<Real>],
    ) -> Result<(ResidualVector, Vec<Real>)> {
        let mesh = &self.problem.mesh;
        let mut r = ResidualVector::zeros(mesh.n_nodes());
        let mut s_new = vec![0.0; mesh.n_elements() * 8];
        for (e, conn) in mesh.hex8.iter().enumerate() {
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
            let (r_u_e, r_t_e, s_q) = self.element_internal(worker, e, &u_e, &t_e, &s_e, dt)?;
            for a in 0..8 {
                for i in 0..3 {
                    r.r_u[3 * conn[a] + i] += r_u_e[3 * a + i];
                }
                r.r_t[conn[a]] += r_t_e[a];
                s_new[8 * e + a] = s_q[a];
            }
        }
        self.subtract_external(&mut r, sched);
        for row in r.r_t.iter_mut() {
            *row *= dt;
        }
        for (m, d) in r.dirichlet_u.iter_mut().zip(dirichlet_u) {
            *m = d.is_some();
        }
        for (m, d) in r.dirichlet_t.iter_mut().zip(dirichlet_t) {
            *m = d.is_some();
        }
        Ok((r, s_new))
    }
}
