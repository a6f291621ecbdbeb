//! Fixed-size tensor algebra, deformation/thermal invariants and their
//! shifted forms.
//!
//! All network inputs derive from here: the principal invariants
//! `I1 = tr C`, `I2 = tr cof C`, `J = det F` shifted to vanish at the rest
//! state, the referential thermal gradient `g = -Grad(ln T)`, and the
//! norm-valued dissipation invariants `Ī4..Ī6`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Row-major 3×3 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor2<T>(pub [[T; 3]; 3]);

/// 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Scalar> Tensor2<T> {
    pub fn zero() -> Self {
        Tensor2([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn diag(a: T, b: T, d: T) -> Self {
        let mut m = Self::zero();
        m.0[0][0] = a;
        m.0[1][1] = b;
        m.0[2][2] = d;
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = T::zero();
                for k in 0..3 {
                    s = s + self.0[i][k] * rhs.0[k][j];
                }
                m.0[i][j] = s;
            }
        }
        m
    }

    pub fn matvec(&self, v: &Vec3<T>) -> Vec3<T> {
        let mut out = [T::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2];
        }
        Vec3(out)
    }

    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Cofactor tensor, `cof A = det(A)·A⁻ᵀ`, evaluated in closed form from
    /// the 2×2 minors so no division is involved.
    pub fn cof(&self) -> Self {
        let m = &self.0;
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                out.0[i][j] = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
            }
        }
        out
    }

    /// Inverse via the adjugate; caller must ensure the determinant is nonzero.
    pub fn inverse(&self) -> Self {
        let d = self.det();
        let cof = self.cof();
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = cof.0[j][i] / d;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i][j] + rhs.0[i][j];
            }
        }
        m
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i][j] - rhs.0[i][j];
            }
        }
        m
    }

    pub fn scale(&self, a: T) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = m.0[i][j] * a;
            }
        }
        m
    }

    /// Frobenius double contraction A : B.
    pub fn ddot(&self, rhs: &Self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s = s + self.0[i][j] * rhs.0[i][j];
            }
        }
        s
    }

    pub fn norm_inf(&self) -> T {
        let mut m = T::zero();
        for row in &self.0 {
            for &x in row {
                m = m.max(x.abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|r| r.iter().all(|x| x.is_finite()))
    }
}

impl<T: Scalar> Vec3<T> {
    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    pub fn dot(&self, rhs: &Self) -> T {
        self.0[0] * rhs.0[0] + self.0[1] * rhs.0[1] + self.0[2] * rhs.0[2]
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, a: T) -> Self {
        Vec3([self.0[0] * a, self.0[1] * a, self.0[2] * a])
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Vec3([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Vec3([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ])
    }

    pub fn cross(&self, rhs: &Self) -> Self {
        Vec3([
            self.0[1] * rhs.0[2] - self.0[2] * rhs.0[1],
            self.0[2] * rhs.0[0] - self.0[0] * rhs.0[2],
            self.0[0] * rhs.0[1] - self.0[1] * rhs.0[0],
        ])
    }
}

/// Principal deformation invariants with their rest-state shifts.
#[derive(Debug, Clone, Copy)]
pub struct InvariantSet<T> {
    pub i1: T,
    pub i2: T,
    pub j: T,
    pub i1_bar: T,
    pub i2_bar: T,
    pub j_bar: T,
}

/// Norm-valued dissipation invariants `Ī4 = ‖g‖_I`, `Ī5 = ‖g‖_C`, `Ī6 = ‖g‖_{cof C}`.
#[derive(Debug, Clone, Copy)]
pub struct DissipationInvariantSet<T> {
    pub i4_bar: T,
    pub i5_bar: T,
    pub i6_bar: T,
}

/// `I1 = tr C`, `I2 = tr cof C`, `J = det F` with shifts `Ī = I − I(rest)`.
///
/// Fails when `det F ≤ 0`.
pub fn invariants<T: Scalar>(f: &Tensor2<T>) -> Result<InvariantSet<T>> {
    let j = f.det();
    if !(j > T::zero()) {
        return Err(Error::domain(
            "invariants",
            format!("det F = {j} must be positive"),
        ));
    }
    let c_t = f.transpose().matmul(f);
    let i1 = c_t.trace();
    let i2 = c_t.cof().trace();
    let three = c::<T>(3.0);
    Ok(InvariantSet {
        i1,
        i2,
        j,
        i1_bar: i1 - three,
        i2_bar: i2 - three,
        j_bar: j - T::one(),
    })
}

/// Referential thermal gradient `g = -Grad(T)/T = -Grad(ln T)`.
pub fn thermal_gradient<T: Scalar>(grad_t: &Vec3<T>, temperature: T) -> Result<Vec3<T>> {
    if !(temperature > T::zero()) {
        return Err(Error::domain(
            "thermal_gradient",
            format!("T = {temperature} must be positive"),
        ));
    }
    Ok(grad_t.scale(-T::one() / temperature))
}

/// Tensor-induced norms of `g` under I, C and cof C.
pub fn dissipation_invariants<T: Scalar>(
    g: &Vec3<T>,
    f: &Tensor2<T>,
) -> Result<DissipationInvariantSet<T>> {
    let j = f.det();
    if !(j > T::zero()) {
        return Err(Error::domain(
            "dissipation_invariants",
            format!("det F = {j} must be positive"),
        ));
    }
    let c_t = f.transpose().matmul(f);
    let cof_c = c_t.cof();
    let i4 = g.dot(g).sqrt();
    let i5 = g.dot(&c_t.matvec(g)).sqrt();
    let i6 = g.dot(&cof_c.matvec(g)).sqrt();
    Ok(DissipationInvariantSet {
        i4_bar: i4,
        i5_bar: i5,
        i6_bar: i6,
    })
}

/// Closed-form derivatives of the invariants with respect to F:
/// `∂I1/∂F = 2F`, `∂I2/∂F = 2F(I1·I − C)`, `∂J/∂F = cof F`.
pub fn invariant_derivatives<T: Scalar>(f: &Tensor2<T>) -> (Tensor2<T>, Tensor2<T>, Tensor2<T>) {
    let two = c::<T>(2.0);
    let c_t = f.transpose().matmul(f);
    let i1 = c_t.trace();
    let di1 = f.scale(two);
    let mut i1_eye_minus_c = c_t.scale(-T::one());
    for i in 0..3 {
        i1_eye_minus_c.0[i][i] = i1_eye_minus_c.0[i][i] + i1;
    }
    let di2 = f.matmul(&i1_eye_minus_c).scale(two);
    let dj = f.cof();
    (di1, di2, dj)
}

/// Derivatives of the dissipation invariants with respect to g:
/// `∂Ī4/∂g = g/Ī4`, `∂Ī5/∂g = C·g/Ī5`, `∂Ī6/∂g = cofC·g/Ī6`.
///
/// At `g = 0` the norms are non-differentiable; the zero vector is returned,
/// matching the downstream convention that the heat flux vanishes exactly at
/// zero driving force.
pub fn dissipation_invariant_derivatives<T: Scalar>(
    g: &Vec3<T>,
    f: &Tensor2<T>,
) -> (Vec3<T>, Vec3<T>, Vec3<T>) {
    let c_t = f.transpose().matmul(f);
    let cof_c = c_t.cof();
    let i4 = g.dot(g).sqrt();
    if !(i4 > T::zero()) {
        return (Vec3::zero(), Vec3::zero(), Vec3::zero());
    }
    let cg = c_t.matvec(g);
    let cofg = cof_c.matvec(g);
    let i5 = g.dot(&cg).sqrt();
    let i6 = g.dot(&cofg).sqrt();
    (
        g.scale(T::one() / i4),
        cg.scale(T::one() / i5),
        cofg.scale(T::one() / i6),
    )
}

/// Uniformly distributed rotation from a seeded generator (quaternion method).
/// Deterministic for a fixed seed; `QᵀQ = I` and `det Q = +1` to round-off.
pub fn random_rotation<T: Scalar>(seed: u64) -> Tensor2<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rotation_from_rng(&mut rng)
}

/// Rotation drawn from an existing generator.
pub fn rotation_from_rng<T: Scalar, R: Rng>(rng: &mut R) -> Tensor2<T> {
    // Four standard normals via Box-Muller, normalized to a unit quaternion.
    let mut q = [0.0f64; 4];
    for pair in 0..2 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (-2.0 * u1.ln()).sqrt();
        q[2 * pair] = r * u2.cos();
        q[2 * pair + 1] = r * u2.sin();
    }
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let m = [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ];
    let mut out = Tensor2::zero();
    for i in 0..3 {
        for j in 0..3 {
            out.0[i][j] = c::<T>(m[i][j]);
        }
    }
    out
}

/// Random deformation gradient with `det F > 0`, bounded distortion around
/// the identity. Test support.
pub fn random_deformation<T: Scalar, R: Rng>(rng: &mut R, spread: f64) -> Tensor2<T> {
    loop {
        let mut f = [[0.0f64; 3]; 3];
        for (i, row) in f.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = if i == j { 1.0 } else { 0.0 } + rng.gen_range(-spread..spread);
            }
        }
        let det = f[0][0] * (f[1][1] * f[2][2] - f[1][2] * f[2][1])
            - f[0][1] * (f[1][0] * f[2][2] - f[1][2] * f[2][0])
            + f[0][2] * (f[1][0] * f[2][1] - f[1][1] * f[2][0]);
        if det > 0.2 {
            let mut out = Tensor2::zero();
            for i in 0..3 {
                for j in 0..3 {
                    out.0[i][j] = c::<T>(f[i][j]);
                }
            }
            return out;
        }
    }
}
