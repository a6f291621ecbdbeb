//! Analytic Helmholtz-based reference models used to generate synthetic
//! training data and to verify the forward solver.
//!
//! Both models are given by a Helmholtz energy `ψ(F, T)` and a conduction
//! potential `χ(g; F, T) = (λ_T/2)·T·g·cof(C)·g`, with state laws
//! `P = ∂ψ/∂F`, `s = −∂ψ/∂T`, `q = ∂χ/∂g = λ_T·T·cof(C)·g`. All derivatives
//! are implemented analytically (closed form) and cross-checked against
//! finite differences in the tests — these models are the oracle for the
//! learned potentials and must stay independent of the differentiation
//! engine.
//!
//! Units: mm, N, s, K — stresses in MPa, energy densities in mJ/mm³, heat
//! flux in mW/mm², conductivity in mW/mm/K.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Tensor2, Vec3};
use crate::scalar::{c, Scalar};

/// Passive-mechanics thermal model (rigid-conductor study).
///
/// `ψ = a I1 + b I2 + c I3 − (d/2) ln I3 + c_T0[(T−T0) − T ln(T/T0)]` with
/// `d = 2a + 4b + 2c` enforcing a stress-free reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalModelParams<T> {
    /// MPa.
    pub a: T,
    pub b: T,
    pub c: T,
    /// mW·mm⁻¹·K⁻¹.
    pub lambda_t: T,
    /// mJ·mm⁻³·K⁻¹.
    pub c_t0: T,
    /// K.
    pub t0: T,
}

impl<T: Scalar> Default for ThermalModelParams<T> {
    fn default() -> Self {
        ThermalModelParams {
            a: c(1000.0),
            b: c(1000.0),
            c: c(1000.0),
            lambda_t: c(30.2),
            c_t0: c(15.0),
            t0: c(293.15),
        }
    }
}

impl<T: Scalar> ThermalModelParams<T> {
    /// `d = 2a + 4b + 2c`, exactly.
    pub fn d(&self) -> T {
        let two = c::<T>(2.0);
        let four = c::<T>(4.0);
        two * self.a + four * self.b + two * self.c
    }
}

/// Fully coupled thermomechanical model.
///
/// `ψ = ψ_mech + ψ_th + ψ_cpl` with a compressible neo-Hookean mechanical
/// part, a nonlinear caloric part through `y(T) = (−1+√(1+8T))/4`, and the
/// thermoelastic coupling `ψ_cpl = −(3/2)·κ·α0·(T−T0)·ln I3` (κ the bulk
/// modulus), so that heating a stress-free solid expands it and tension
/// cools it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledModelParams<T> {
    /// Lamé parameters, MPa.
    pub lambda: T,
    pub mu: T,
    /// Thermal expansion coefficient, 1/K.
    pub alpha0: T,
    /// mW·mm⁻¹·K⁻¹.
    pub lambda_t: T,
    /// mJ·mm⁻³·K⁻¹.
    pub c_t0: T,
    /// K.
    pub t0: T,
}

impl<T: Scalar> Default for CoupledModelParams<T> {
    fn default() -> Self {
        CoupledModelParams {
            lambda: c(101_160.0),
            mu: c(73_255.0),
            alpha0: c(1.1e-5),
            lambda_t: c(50.2),
            c_t0: c(3.59),
            t0: c(293.15),
        }
    }
}

impl<T: Scalar> CoupledModelParams<T> {
    /// Bulk modulus κ = λ + 2μ/3.
    pub fn kappa(&self) -> T {
        self.lambda + c::<T>(2.0 / 3.0) * self.mu
    }

    fn y(&self, t: T) -> T {
        let eight = c::<T>(8.0);
        let four = c::<T>(4.0);
        ((T::one() + eight * t).sqrt() - T::one()) / four
    }
}

/// Selected analytic reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefModel<T> {
    Thermal(ThermalModelParams<T>),
    Coupled(CoupledModelParams<T>),
}

fn check_state<T: Scalar>(f: &Tensor2<T>, t: T) -> Result<(Tensor2<T>, T)> {
    let j = f.det();
    if !(j > T::zero()) {
        return Err(Error::domain("refmodel", format!("det F = {j} ≤ 0")));
    }
    if !(t > T::zero()) {
        return Err(Error::domain("refmodel", format!("T = {t} ≤ 0")));
    }
    Ok((f.transpose().matmul(f), j * j))
}

impl<T: Scalar> RefModel<T> {
    pub fn t0(&self) -> T {
        match self {
            RefModel::Thermal(p) => p.t0,
            RefModel::Coupled(p) => p.t0,
        }
    }

    pub fn lambda_t(&self) -> T {
        match self {
            RefModel::Thermal(p) => p.lambda_t,
            RefModel::Coupled(p) => p.lambda_t,
        }
    }

    /// Helmholtz energy ψ(F, T), mJ/mm³.
    pub fn helmholtz(&self, f: &Tensor2<T>, t: T) -> Result<T> {
        let (c_tensor, i3) = check_state(f, t)?;
        let i1 = c_tensor.trace();
        let ln_i3 = i3.ln();
        Ok(match self {
            RefModel::Thermal(p) => {
                let i2 = c_tensor.cof().trace();
                let half = c::<T>(0.5);
                let mech = p.a * i1 + p.b * i2 + p.c * i3 - half * p.d() * ln_i3;
                let th = p.c_t0 * ((t - p.t0) - t * (t / p.t0).ln());
                mech + th
            }
            RefModel::Coupled(p) => {
                let three = c::<T>(3.0);
                let half = c::<T>(0.5);
                let quarter = c::<T>(0.25);
                let mech = half * p.mu * (i1 - three - ln_i3)
                    + quarter * p.lambda * (i3 - T::one() - ln_i3);
                let y = p.y(t);
                let y0 = p.y(p.t0);
                let th = p.c_t0 * (y + y * y - t * (y / y0).ln());
                let cpl = -c::<T>(1.5) * p.kappa() * p.alpha0 * (t - p.t0) * ln_i3;
                mech + th + cpl
            }
        })
    }

    /// Piola stress P = ∂ψ/∂F (analytic), MPa.
    pub fn stress(&self, f: &Tensor2<T>, t: T) -> Result<Tensor2<T>> {
        let (c_tensor, i3) = check_state(f, t)?;
        let two = c::<T>(2.0);
        // dψ/dC expressed with I, C, C⁻¹; then P = 2 F dψ/dC.
        let eye = Tensor2::identity();
        let c_inv = c_tensor.inverse();
        let dpsi_dc = match self {
            RefModel::Thermal(p) => {
                let i1 = c_tensor.trace();
                let half = c::<T>(0.5);
                // ∂I2/∂C = I1·I − C; ∂I3/∂C = I3·C⁻¹.
                let mut m = eye.scale(p.a);
                m = m.add(&eye.scale(p.b * i1)).sub(&c_tensor.scale(p.b));
                m = m.add(&c_inv.scale((p.c - half * p.d() / i3) * i3));
                m
            }
            RefModel::Coupled(p) => {
                let half = c::<T>(0.5);
                let quarter = c::<T>(0.25);
                let mut m = eye.sub(&c_inv).scale(half * p.mu);
                m = m.add(&c_inv.scale(quarter * p.lambda * (i3 - T::one())));
                m = m.sub(&c_inv.scale(c::<T>(1.5) * p.kappa() * p.alpha0 * (t - p.t0)));
                m
            }
        };
        Ok(f.matmul(&dpsi_dc).scale(two))
    }

    /// Entropy density s = −∂ψ/∂T (analytic), mJ·mm⁻³·K⁻¹.
    pub fn entropy(&self, f: &Tensor2<T>, t: T) -> Result<T> {
        let (_, i3) = check_state(f, t)?;
        Ok(match self {
            RefModel::Thermal(p) => p.c_t0 * (t / p.t0).ln(),
            RefModel::Coupled(p) => {
                let y = p.y(t);
                let y0 = p.y(p.t0);
                p.c_t0 * (y / y0).ln() + c::<T>(1.5) * p.kappa() * p.alpha0 * i3.ln()
            }
        })
    }

    /// Inverse caloric map: the temperature at which `entropy(F, T) = s`.
    pub fn temperature_from_entropy(&self, f: &Tensor2<T>, s: T) -> Result<T> {
        let j = f.det();
        if !(j > T::zero()) {
            return Err(Error::domain("refmodel", "det F ≤ 0"));
        }
        Ok(match self {
            RefModel::Thermal(p) => p.t0 * (s / p.c_t0).exp(),
            RefModel::Coupled(p) => {
                let i3 = j * j;
                let y0 = p.y(p.t0);
                let arg = (s - c::<T>(1.5) * p.kappa() * p.alpha0 * i3.ln()) / p.c_t0;
                let y = y0 * arg.exp();
                let two = c::<T>(2.0);
                two * y * y + y
            }
        })
    }

    /// Internal energy e = ψ + T·s at (F, T).
    pub fn internal_energy(&self, f: &Tensor2<T>, t: T) -> Result<T> {
        Ok(self.helmholtz(f, t)? + t * self.entropy(f, t)?)
    }

    /// Referential heat flux q = ∂χ/∂g = λ_T·T·cof(C)·g, mW/mm².
    pub fn heat_flux(&self, g: &Vec3<T>, f: &Tensor2<T>, t: T) -> Result<Vec3<T>> {
        let (c_tensor, _) = check_state(f, t)?;
        let cof_c = c_tensor.cof();
        Ok(cof_c.matvec(g).scale(self.lambda_t() * t))
    }

    /// Conduction potential χ = (λ_T/2)·T·g·cof(C)·g.
    pub fn conduction_potential(&self, g: &Vec3<T>, f: &Tensor2<T>, t: T) -> Result<T> {
        let (c_tensor, _) = check_state(f, t)?;
        let half = c::<T>(0.5);
        Ok(half * self.lambda_t() * t * g.dot(&c_tensor.cof().matvec(g)))
    }

    /// Volumetric heat capacity `c_vol = −T·∂²ψ/∂T²` and thermoelastic
    /// coupling power `T·(∂²ψ/∂F∂T) : Ḟ`.
    pub fn heat_capacity_terms(&self, f: &Tensor2<T>, t: T, f_dot: &Tensor2<T>) -> Result<(T, T)> {
        check_state(f, t)?;
        Ok(match self {
            RefModel::Thermal(p) => (p.c_t0, T::zero()),
            RefModel::Coupled(p) => {
                // s_th = c_T0 ln(y/y0): ∂s/∂T = c_T0·y'/y with y' = 1/(4y+1),
                // so c_vol = T·∂s/∂T = c_T0·(2y+1)/(4y+1) using T = 2y² + y.
                let y = p.y(t);
                let two = c::<T>(2.0);
                let four = c::<T>(4.0);
                let c_vol = p.c_t0 * (two * y + T::one()) / (four * y + T::one());
                // ∂²ψ/∂F∂T = 2F·∂²ψ/∂C∂T = −3κα0·F⁻ᵀ.
                let f_inv_t = f.inverse().transpose();
                let coupling = -c::<T>(3.0) * p.kappa() * p.alpha0 * t * f_inv_t.ddot(f_dot);
                (c_vol, coupling)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::random_deformation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    type M = Tensor2<f64>;

    fn thermal() -> RefModel<f64> {
        RefModel::Thermal(ThermalModelParams::default())
    }

    fn coupled() -> RefModel<f64> {
        RefModel::Coupled(CoupledModelParams::default())
    }

    #[test]
    fn thermal_rest_energy_is_constant_offset() {
        // ψ(I, T0) = 3a + 3b + c (I1 = I2 = 3, I3 = 1, ln I3 = 0, ψ_th = 0).
        let psi = thermal().helmholtz(&M::identity(), 293.15).unwrap();
        assert!((psi - (3.0 * 1000.0 + 3.0 * 1000.0 + 1000.0)).abs() < 1e-9);
    }

    #[test]
    fn stress_free_reference_states() {
        let p = thermal().stress(&M::identity(), 293.15).unwrap();
        assert!(p.norm_inf() < 1e-9, "thermal model: d-relation cancellation");
        // The thermal model is stress-free at F = I for any temperature.
        let p = thermal().stress(&M::identity(), 350.0).unwrap();
        assert!(p.norm_inf() < 1e-9);
        let p = coupled().stress(&M::identity(), 293.15).unwrap();
        assert!(p.norm_inf() < 1e-9, "coupled model at (I, T0)");
    }

    #[test]
    fn coupled_thermal_stress_at_heated_reference() {
        // P(I, T0+10) = −3κα0·10·I: constrained heating produces compression.
        let params = CoupledModelParams::<f64>::default();
        let expect = -3.0 * params.kappa() * params.alpha0 * 10.0;
        let p = coupled().stress(&M::identity(), 293.15 + 10.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { expect } else { 0.0 };
                assert!((p.0[i][j] - want).abs() < 1e-9 * expect.abs());
            }
        }
    }

    #[test]
    fn stress_matches_fd_of_helmholtz() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for model in [thermal(), coupled()] {
            for _ in 0..20 {
                let f: M = random_deformation(&mut rng, 0.2);
                let t: f64 = rng.gen_range(260.0..340.0);
                let p = model.stress(&f, t).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        let h = 1e-6;
                        let mut fp = f;
                        let mut fm = f;
                        fp.0[i][j] += h;
                        fm.0[i][j] -= h;
                        let wp = model.helmholtz(&fp, t).unwrap();
                        let wm = model.helmholtz(&fm, t).unwrap();
                        let fd = (wp - wm) / (2.0 * h);
                        assert!(
                            (p.0[i][j] - fd).abs() / fd.abs().max(p.norm_inf()) < 1e-6,
                            "P[{i}][{j}] {} vs {}",
                            p.0[i][j],
                            fd
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn entropy_matches_fd_of_helmholtz() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for model in [thermal(), coupled()] {
            for _ in 0..40 {
                let f: M = random_deformation(&mut rng, 0.2);
                let t: f64 = rng.gen_range(260.0..340.0);
                let s = model.entropy(&f, t).unwrap();
                let h = 1e-5 * t;
                let wp = model.helmholtz(&f, t + h).unwrap();
                let wm = model.helmholtz(&f, t - h).unwrap();
                let fd = -(wp - wm) / (2.0 * h);
                assert!(
                    (s - fd).abs() < 1e-8 * fd.abs().max(1.0),
                    "s = {s} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn thermal_entropy_closed_form() {
        let p = ThermalModelParams::<f64>::default();
        for t in [260.0, 293.15, 330.0] {
            let s = thermal().entropy(&M::identity(), t).unwrap();
            assert!((s - p.c_t0 * (t / p.t0).ln()).abs() < 1e-12);
        }
        assert_eq!(thermal().entropy(&M::identity(), 293.15).unwrap(), 0.0);
        assert_eq!(coupled().entropy(&M::identity(), 293.15).unwrap(), 0.0);
    }

    #[test]
    fn heat_flux_closed_form_and_fd() {
        // F = I, T = T0, g = (1,0,0) → q = λ_T·T0·(1,0,0).
        let q = thermal()
            .heat_flux(&Vec3([1.0, 0.0, 0.0]), &M::identity(), 293.15)
            .unwrap();
        assert!((q.0[0] - 30.2 * 293.15).abs() < 1e-9);
        assert_eq!((q.0[1], q.0[2]), (0.0, 0.0));
        // Random states: q = ∂χ/∂g.
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for model in [thermal(), coupled()] {
            for _ in 0..20 {
                let f: M = random_deformation(&mut rng, 0.3);
                let t: f64 = rng.gen_range(270.0..320.0);
                let g = Vec3([
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]);
                let q = model.heat_flux(&g, &f, t).unwrap();
                assert!(q.dot(&g) >= 0.0, "conduction dissipates");
                for k in 0..3 {
                    let h = 1e-6;
                    let mut gp = g;
                    let mut gm = g;
                    gp.0[k] += h;
                    gm.0[k] -= h;
                    let cp = model.conduction_potential(&gp, &f, t).unwrap();
                    let cm = model.conduction_potential(&gm, &f, t).unwrap();
                    let fd = (cp - cm) / (2.0 * h);
                    assert!((q.0[k] - fd).abs() / fd.abs().max(q.norm()) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn heat_capacity_terms_against_fd() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        // Thermal model: c_vol = c_T0 exactly, no coupling.
        let (cv, cp) = thermal()
            .heat_capacity_terms(&M::identity(), 300.0, &M::identity())
            .unwrap();
        assert_eq!(cv, 15.0);
        assert_eq!(cp, 0.0);
        // Coupled model: c_vol = −T ψ_TT via FD of entropy; coupling power
        // against the symbolic form −3κα0·T·tr(F⁻¹Ḟ) and an FD cross-check.
        let model = coupled();
        let params = CoupledModelParams::<f64>::default();
        for _ in 0..20 {
            let f: M = random_deformation(&mut rng, 0.2);
            let t: f64 = rng.gen_range(270.0..330.0);
            let f_dot: M = random_deformation(&mut rng, 0.5);
            let (cv, cpow) = model.heat_capacity_terms(&f, t, &f_dot).unwrap();
            let h = 1e-4;
            let sp = model.entropy(&f, t + h).unwrap();
            let sm = model.entropy(&f, t - h).unwrap();
            let cv_fd = t * (sp - sm) / (2.0 * h);
            assert!((cv - cv_fd).abs() < 1e-6 * cv.abs());
            let symbolic =
                -3.0 * params.kappa() * params.alpha0 * t * f.inverse().matmul(&f_dot).trace();
            assert!((cpow - symbolic).abs() < 1e-9 * symbolic.abs().max(1.0));
            // FD: ∂P/∂T : Ḟ.
            let pp = model.stress(&f, t + h).unwrap();
            let pm = model.stress(&f, t - h).unwrap();
            let mut fd = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    fd += (pp.0[i][j] - pm.0[i][j]) / (2.0 * h) * f_dot.0[i][j];
                }
            }
            assert!((cpow - t * fd).abs() < 1e-4 * cpow.abs().max(1.0));
        }
        // Coupled, Ḟ = 0 → no coupling power.
        let (_, cpow) = model.heat_capacity_terms(&M::identity(), 300.0, &M::zero()).unwrap();
        assert_eq!(cpow, 0.0);
    }

    #[test]
    fn legendre_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for model in [thermal(), coupled()] {
            for _ in 0..50 {
                let f: M = random_deformation(&mut rng, 0.25);
                let t: f64 = rng.gen_range(250.0..350.0);
                let s = model.entropy(&f, t).unwrap();
                let t_back = model.temperature_from_entropy(&f, s).unwrap();
                assert!(
                    (t_back - t).abs() < 1e-8 * t,
                    "round trip {t} → {s} → {t_back}"
                );
            }
        }
    }

    #[test]
    fn free_expansion_equilibrium_stretch() {
        // Heating by ΔT at zero stress: P(γI, T0+ΔT) = 0 near γ = 1 + α0·ΔT.
        let params = CoupledModelParams::<f64>::default();
        let model = coupled();
        let dt = 10.0;
        let t = params.t0 + dt;
        // Bisect P11(γ) = 0.
        let p11 = |gamma: f64| {
            model
                .stress(&M::diag(gamma, gamma, gamma), t)
                .unwrap()
                .0[0][0]
        };
        let (mut lo, mut hi) = (1.0 - 1e-3, 1.0 + 1e-3);
        assert!(p11(lo) > 0.0 && p11(hi) < 0.0 || p11(lo) < 0.0 && p11(hi) > 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if p11(mid) * p11(lo) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let gamma = 0.5 * (lo + hi);
        let expect = params.alpha0 * dt;
        assert!(
            ((gamma - 1.0) - expect).abs() < 0.02 * expect,
            "γ−1 = {} vs α0ΔT = {expect}",
            gamma - 1.0
        );
    }
}
