//! Neural constitutive model: internal energy, dissipation potential and
//! state laws.
//!
//! The internal energy is assembled as
//!
//! ```text
//! e(F, s) = n_T · [ ê(F, s) + e_gr(F) − n_P · J̄ ]
//! ê       = FICNN_{F,s}([Ī1, Ī2, J̄, −J̄, s̄])
//!           + Σ_i { softplus(FICNN_F)_i · softplus(FICNN_s)_i − softplus(0)² }
//! ```
//!
//! with the stress normalization `n_P` and temperature normalization `n_T`
//! evaluated at the rest state `(F, s) = (I, 0)`, so that `e(I,0) = 0`,
//! `P(I,0) = 0` and `T(I,0) = T0` hold for arbitrary parameters. The
//! dissipation potential is a PICNN of the norm invariants `[Ī4, Ī5, Ī6]`
//! parameterized by `[J̄, s̄]`; it is convex in `g`, non-negative, and zero at
//! zero thermal gradient, which makes the heat flux `q = ∂φ/∂g` satisfy the
//! dissipation inequality `q·g ≥ 0` by construction.
//!
//! Temperatures fed to the networks are scaled by the training normalization
//! factor `t_scale`; the public state laws return physical quantities (the
//! whole potential pair simply carries the factor `t_scale`).

pub mod checkpoint;
pub mod eval;

pub use eval::{solve_entropy, EntropySolve, EvalCtx, ModelEval, StateEval};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{InvariantSet, Tensor2, Vec3};
use crate::net::{init_params, ModelLayout, NetworkSpec, ParamVec};
use crate::scalar::{c, Scalar};

/// Temperature-normalization mode of the internal energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NTMode {
    /// `n_T = T̂0 / (∂ê/∂s)|_(I,0)`, recomputed whenever parameters change.
    Computed,
    /// `n_T = 1`; the network identifies the reference temperature itself
    /// (material-point training on experimental data).
    Fixed,
}

/// Normalization constants of a potential model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization<T> {
    /// Reference temperature in kelvin (physical).
    pub t0: T,
    /// Reference entropy; zero by convention.
    pub s0: T,
    /// Training temperature-normalization factor (max |T| over the training
    /// set); 1 when no scaling is applied.
    pub t_scale: T,
    pub n_t_mode: NTMode,
    /// Growth-energy weight ε_gr > 0.
    pub eps_gr: T,
}

impl<T: Scalar> Normalization<T> {
    pub fn standard(t0: T) -> Self {
        Normalization {
            t0,
            s0: T::zero(),
            t_scale: T::one(),
            n_t_mode: NTMode::Computed,
            eps_gr: c(1e-6),
        }
    }

    /// Reference temperature in scaled units.
    pub fn t0_hat(&self) -> T {
        self.t0 / self.t_scale
    }
}

/// Material state at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct MaterialState<T> {
    pub f: Tensor2<T>,
    /// Entropy density.
    pub s: T,
    /// Absolute temperature, K.
    pub t: T,
    /// Referential thermal gradient, 1/mm.
    pub g: Vec3<T>,
    /// Time increment, s.
    pub dt: T,
}

impl<T: Scalar> MaterialState<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.f.det() > T::zero()) {
            return Err(Error::domain("MaterialState", "det F must be positive"));
        }
        if !(self.t > T::zero()) {
            return Err(Error::domain("MaterialState", "T must be positive"));
        }
        Ok(())
    }
}

/// Parameters, architecture and normalization of the learned potentials.
#[derive(Debug, Clone)]
pub struct PotentialModel<T> {
    pub spec: NetworkSpec,
    pub layout: ModelLayout,
    pub params: ParamVec<T>,
    pub norm: Normalization<T>,
}

impl<T: Scalar> PotentialModel<T> {
    /// Fresh model with seeded initialization.
    pub fn init(spec: NetworkSpec, norm: Normalization<T>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = ModelLayout::new(&spec);
        let params = init_params(&spec, &layout, seed);
        Ok(PotentialModel {
            spec,
            layout,
            params,
            norm,
        })
    }

    /// Builds the replayable evaluator (templates + normalization constants)
    /// for the current parameters.
    pub fn evaluator(&self) -> Result<ModelEval<T>> {
        ModelEval::new(self)
    }
}

/// Coercive growth energy `ε_gr·[Ī1 + Ī2 + J̄ − 7 ln J]`.
///
/// Vanishes with zero slope at the rest state and diverges as `J → 0`.
pub fn growth_energy<T: Scalar>(inv: &InvariantSet<T>, eps_gr: T) -> T {
    eps_gr * (inv.i1_bar + inv.i2_bar + inv.j_bar - c::<T>(7.0) * inv.j.ln())
}

/// ∂e_gr/∂F via the invariant chain rule.
pub fn growth_energy_stress<T: Scalar>(f: &Tensor2<T>, eps_gr: T) -> Tensor2<T> {
    let (d1, d2, dj) = crate::kinematics::invariant_derivatives(f);
    let j = f.det();
    let seven = c::<T>(7.0);
    d1.add(&d2)
        .add(&dj.scale(T::one() - seven / j))
        .scale(eps_gr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::invariants;

    #[test]
    fn growth_energy_rest_state() {
        let inv = invariants(&Tensor2::<f64>::identity()).unwrap();
        assert_eq!(growth_energy(&inv, 1.0), 0.0);
        let p = growth_energy_stress(&Tensor2::<f64>::identity(), 1.0);
        assert!(p.norm_inf() < 1e-14);
    }

    #[test]
    fn growth_energy_uniaxial_value() {
        // F = diag(2,1,1), ε_gr = 1 → (6−3)+(9−3)+(2−1)−7 ln 2 = 10 − 7 ln 2
        let inv = invariants(&Tensor2::<f64>::diag(2.0, 1.0, 1.0)).unwrap();
        let e = growth_energy(&inv, 1.0);
        let expect = 10.0 - 7.0 * std::f64::consts::LN_2;
        assert!((e - expect).abs() < 1e-12);
        assert!((e - 5.1479697).abs() < 5e-7);
    }

    #[test]
    fn growth_energy_stress_matches_fd() {
        let f = Tensor2::<f64>([[1.1, 0.04, -0.02], [0.0, 0.93, 0.05], [0.03, 0.0, 1.02]]);
        let p = growth_energy_stress(&f, 0.3);
        for i in 0..3 {
            for j in 0..3 {
                let h = 1e-6;
                let mut fp = f;
                let mut fm = f;
                fp.0[i][j] += h;
                fm.0[i][j] -= h;
                let ep = growth_energy(&invariants(&fp).unwrap(), 0.3);
                let em = growth_energy(&invariants(&fm).unwrap(), 0.3);
                let fd = (ep - em) / (2.0 * h);
                assert!((p.0[i][j] - fd).abs() < 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}
