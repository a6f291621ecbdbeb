//! Minimal differentiation engine: exact first derivatives of scalar-valued
//! computations by reverse accumulation over a recorded tape, and exact
//! second derivatives of scalar→scalar maps by differentiating the adjoint
//! graph.
//!
//! The engine deliberately supports only what the constitutive stack needs:
//! state laws (first derivatives with respect to many inputs), the Newton
//! entropy solve (∂²e/∂s²), and parameter gradients of the training loss.
//! Adjoints are themselves expressed as tape primitives, so derivative nodes
//! can enter further computation and be differentiated again.
//!
//! Tapes are single-writer; frozen [`Program`]s are immutable and can be
//! replayed concurrently, one [`Workspace`] per worker.

mod program;
mod tape;

pub use program::{Program, Workspace};
pub use tape::{Tape, Var};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Value and gradient of a scalar-valued computation at `inputs`.
///
/// Deterministic for fixed input; NaN in the result is reported as a failure.
pub fn value_and_grad<T, F>(f: F, inputs: &[T]) -> Result<(T, Vec<T>)>
where
    T: Scalar,
    F: for<'t> FnOnce(&'t Tape<T>, &[Var<'t, T>]) -> Var<'t, T>,
{
    let tape = Tape::new();
    let vars = tape.inputs(inputs.len());
    let ids: Vec<u32> = vars.iter().map(|v| v.id).collect();
    let y = f(&tape, &vars);
    let yid = y.id;
    let prog = tape.finish();
    let mut ws = prog.workspace();
    for (&id, &x) in ids.iter().zip(inputs) {
        ws.bind(id, x);
    }
    prog.forward(&mut ws)?;
    let val = ws.value(yid);
    if !val.is_finite() {
        return Err(Error::NonFinite("grad: output of computation"));
    }
    prog.backward(&mut ws, &[(yid, T::one())]);
    let g: Vec<T> = ids.iter().map(|&i| ws.adjoint(i)).collect();
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("grad: derivative"));
    }
    Ok((val, g))
}

/// Gradient ∂f/∂input_i for all i.
pub fn grad<T, F>(f: F, inputs: &[T]) -> Result<Vec<T>>
where
    T: Scalar,
    F: for<'t> FnOnce(&'t Tape<T>, &[Var<'t, T>]) -> Var<'t, T>,
{
    value_and_grad(f, inputs).map(|(_, g)| g)
}

/// d²f/dx² of a scalar→scalar computation.
///
/// The first derivative is appended to the tape as an adjoint graph and
/// differentiated in turn, so the result is exact under the primitive set.
pub fn second_derivative<T, F>(f: F, x: T) -> Result<T>
where
    T: Scalar,
    F: for<'t> FnOnce(&'t Tape<T>, Var<'t, T>) -> Var<'t, T>,
{
    let tape = Tape::new();
    let xv = tape.input();
    let xid = xv.id;
    let y = f(&tape, xv);
    let dy = tape.adjoint(y, &[xv])[0];
    let dyid = dy.id;
    let prog = tape.finish();
    let mut ws = prog.workspace();
    ws.bind(xid, x);
    prog.forward(&mut ws)?;
    if !ws.value(dyid).is_finite() {
        return Err(Error::NonFinite("second_derivative: first derivative"));
    }
    prog.backward(&mut ws, &[(dyid, T::one())]);
    let d2 = ws.adjoint(xid);
    if !d2.is_finite() {
        return Err(Error::NonFinite("second_derivative: result"));
    }
    Ok(d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Central finite-difference oracle with input-scaled step.
    fn fd_grad<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn polynomial_gradient() {
        // f(x) = x², x = 3 → 6
        let g = grad(|_t, v| v[0] * v[0], &[3.0f64]).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn softplus_product_gradient() {
        // f(x,y) = x softplus(y) at (1,0) → (ln 2, 0.5)
        let g = grad(|_t, v| v[0] * v[1].softplus(), &[1.0, 0.0]).unwrap();
        assert!((g[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_constant_is_exactly_zero() {
        let g = grad(
            |t, v| {
                let c = t.constant(4.2);
                let _ = v[0]; // unused input
                c.exp() * c
            },
            &[1.3],
        )
        .unwrap();
        assert_eq!(g[0], 0.0);
    }

    fn lin_f<'t>(_t: &'t Tape<f64>, v: &[Var<'t, f64>]) -> Var<'t, f64> {
        (v[0] * v[1]).tanh() + v[1].softplus() * v[0].exp()
    }

    fn lin_g<'t>(_t: &'t Tape<f64>, v: &[Var<'t, f64>]) -> Var<'t, f64> {
        (v[0] + v[1] * v[1]).sigmoid()
    }

    #[test]
    fn linearity_of_grad() {
        let (a, b) = (1.7, -0.45);
        let x = [0.4, -1.2];
        let gf = grad(lin_f, &x).unwrap();
        let gg = grad(lin_g, &x).unwrap();
        let gc = grad(
            |t, v| lin_f(t, v).scale(a) + lin_g(t, v).scale(b),
            &x,
        )
        .unwrap();
        for i in 0..2 {
            assert!((gc[i] - (a * gf[i] + b * gg[i])).abs() < 1e-12);
        }
    }

    /// Random composite of supported primitives over five inputs.
    fn composite5<'t>(t: &'t Tape<f64>, v: &[Var<'t, f64>]) -> Var<'t, f64> {
        let s = v[0] * v[1].softplus() + (v[2] * v[3]).tanh();
        let w = (v[4].square() + t.constant(0.3)).ln() * v[0].sigmoid();
        let d = t.dot(
            &[(v[0], v[3]), (v[1], v[4])],
            &[(0.25, v[2])],
            0.1,
        );
        let e = (v[1].scale(0.2) + v[2].scale(-0.1)).exp_capped(30.0);
        s + w + d.gelu() + e + (v[3] + t.constant(2.2)).sqrt()
    }

    fn composite5_f64(x: &[f64]) -> f64 {
        use crate::scalar::{exp_capped, sigmoid, softplus};
        let gelu = |z: f64| {
            let k = 0.7978845608028654;
            0.5 * z * (1.0 + (k * (z + 0.044715 * z * z * z)).tanh())
        };
        let s = x[0] * softplus(x[1]) + (x[2] * x[3]).tanh();
        let w = (x[4] * x[4] + 0.3).ln() * sigmoid(x[0]);
        let d = x[0] * x[3] + x[1] * x[4] + 0.25 * x[2] + 0.1;
        let e = exp_capped(0.2 * x[1] - 0.1 * x[2], 30.0);
        s + w + gelu(d) + e + (x[3] + 2.2).sqrt()
    }

    #[test]
    fn thousand_random_composites_match_fd() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.5f64..1.5)).collect();
            let ge = grad(composite5, &x).unwrap();
            let gf = fd_grad(&composite5_f64, &x);
            for i in 0..5 {
                assert!(
                    rel_err(ge[i], gf[i]) < 1e-6,
                    "i={i}, engine={}, fd={}, x={x:?}",
                    ge[i],
                    gf[i]
                );
            }
        }
    }

    #[test]
    fn second_derivative_cubic() {
        // f(x)=x³ at x=2 → 12
        let d2 = second_derivative(|_t, x| x * x * x, 2.0f64).unwrap();
        assert!((d2 - 12.0).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_softplus_at_zero() {
        // softplus''(0) = sigmoid'(0) = 0.25
        let d2 = second_derivative(|_t, x| x.softplus(), 0.0f64).unwrap();
        assert!((d2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn second_derivative_random_composites_match_fd() {
        let f64f = |x: f64| {
            let t = (x * 0.7).tanh();
            crate::scalar::softplus(x * t) + (x * x + 0.5).ln()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-2.0f64..2.0);
            let d2 = second_derivative(
                |_t, v| {
                    let t = v.scale(0.7).tanh();
                    (v * t).softplus() + (v.square() + _t.constant(0.5)).ln()
                },
                x,
            )
            .unwrap();
            let h = 1e-4 * x.abs().max(1.0);
            let fd = (f64f(x + h) - 2.0 * f64f(x) + f64f(x - h)) / (h * h);
            assert!(rel_err(d2, fd) < 1e-4, "x={x}, engine={d2}, fd={fd}");
        }
    }

    #[test]
    fn relu_and_max_kink_rules() {
        // relu derivative at 0 is 0; max ties route to the second argument.
        let g = grad(|_t, v| v[0].relu(), &[0.0]).unwrap();
        assert_eq!(g[0], 0.0);
        let g = grad(|t, v| v[0].max(t.constant(0.0)), &[0.0]).unwrap();
        assert_eq!(g[0], 0.0);
        let g = grad(|_t, v| v[0].max(v[1]), &[1.0, 1.0]).unwrap();
        assert_eq!(g, vec![0.0, 1.0]);
        let g = grad(|_t, v| v[0].min(v[1]), &[1.0, 1.0]).unwrap();
        assert_eq!(g, vec![0.0, 1.0]);
    }

    #[test]
    fn domain_errors_reported() {
        assert!(grad(|_t, v| v[0].ln(), &[-1.0]).is_err());
        assert!(grad(|_t, v| v[0].sqrt(), &[-0.5]).is_err());
    }

    #[test]
    fn replay_reproduces_values_bit_exactly() {
        let tape = Tape::new();
        let v = tape.inputs(3);
        let y = composite5(&tape, &[v[0], v[1], v[2], v[0], v[1]]);
        let yid = y.id;
        let ids: Vec<u32> = v.iter().map(|x| x.id).collect();
        let prog = tape.finish();
        let mut ws = prog.workspace();
        for (i, id) in ids.iter().enumerate() {
            ws.bind(*id, 0.3 * (i as f64) - 0.2);
        }
        prog.forward(&mut ws).unwrap();
        let first = ws.value(yid);
        let snapshot = ws.values.clone();
        prog.forward(&mut ws).unwrap();
        assert_eq!(first.to_bits(), ws.value(yid).to_bits());
        for (a, b) in snapshot.iter().zip(&ws.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn adjoint_nodes_feed_further_computation() {
        // Mixed second derivative through a derivative node:
        // y = x0²·x1, dy/dx0 = 2 x0 x1, d(dy/dx0)/dx1 = 2 x0.
        let tape: Tape<f64> = Tape::new();
        let v = tape.inputs(2);
        let y = v[0].square() * v[1];
        let dydx0 = tape.adjoint(y, &[v[0]])[0];
        let (i0, i1, did) = (v[0].id, v[1].id, dydx0.id);
        let prog = tape.finish();
        let mut ws = prog.workspace();
        ws.bind(i0, 3.0);
        ws.bind(i1, -1.5);
        prog.forward(&mut ws).unwrap();
        assert!((ws.value(did) - 2.0 * 3.0 * -1.5).abs() < 1e-14);
        prog.backward(&mut ws, &[(did, 1.0)]);
        assert!((ws.adjoint(i1) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn generic_scalar_f32_instantiation() {
        let g = grad::<f32, _>(|_t, v| v[0] * v[0] + v[1].softplus(), &[2.0f32, 0.0])
            .unwrap();
        assert!((g[0] - 4.0).abs() < 1e-5);
        assert!((g[1] - 0.5).abs() < 1e-5);
    }
}
