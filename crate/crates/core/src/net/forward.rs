//! Network forward passes as tape graphs, plus plain-value wrappers.
//!
//! The builders take the flat parameter vector as tape variables (one slot
//! per parameter, flat-indexed) so the same graph serves inference templates
//! and training-gradient templates. Zero anchoring is literal: the bias-only
//! activation path is recomputed with the identical accumulation order and
//! subtracted, so the output at zero input is exactly 0.0.

use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

use super::params::{DenseLayerRefs, FicnnLayout, MlpLayout, PicnnLayout, TensorRef};
use super::{Activation, FicnnSpec, MlpSpec, PicnnSpec, EXP_CAP};

/// Parameter variables of a model on some tape: the full flat slice.
pub type FicnnVars<'t, T> = [Var<'t, T>];
pub type PicnnVars<'t, T> = [Var<'t, T>];
pub type MlpVars<'t, T> = [Var<'t, T>];

fn apply_act<'t, T: Scalar>(act: Activation, v: Var<'t, T>) -> Var<'t, T> {
    match act {
        Activation::Exp => v.exp_capped(c(EXP_CAP)),
        Activation::Softplus => v.softplus(),
        Activation::Relu => v.relu(),
        Activation::Gelu => v.gelu(),
        Activation::Tanh => v.tanh(),
        Activation::Identity => v,
    }
}

fn row_vars<'t, T: Scalar>(p: &[Var<'t, T>], re: TensorRef, i: usize) -> Vec<Var<'t, T>> {
    (0..re.cols).map(|j| p[re.idx(i, j)]).collect()
}

/// σ(W·x + V·x0 + b) − σ(b) for one FICNN layer; `w` may be absent (first
/// layer) and `b` may be absent (no output bias), in which case the anchor
/// uses σ(0).
fn ficnn_layer<'t, T: Scalar>(
    tape: &'t Tape<T>,
    act: Activation,
    w: Option<(TensorRef, &[Var<'t, T>])>,
    v: TensorRef,
    b: Option<TensorRef>,
    p: &[Var<'t, T>],
    x0: &[Var<'t, T>],
    rows: usize,
) -> Vec<Var<'t, T>> {
    (0..rows)
        .map(|i| {
            let mut pairs: Vec<(Var<T>, Var<T>)> = Vec::new();
            if let Some((wre, xprev)) = w {
                for j in 0..wre.cols {
                    pairs.push((p[wre.idx(i, j)], xprev[j]));
                }
            }
            for j in 0..v.cols {
                pairs.push((p[v.idx(i, j)], x0[j]));
            }
            let (z, anchor_pre) = match b {
                Some(bre) => {
                    let bv = p[bre.idx(i, 0)];
                    (tape.dot(&pairs, &[(T::one(), bv)], T::zero()), bv)
                }
                None => (tape.dot(&pairs, &[], T::zero()), tape.constant(T::zero())),
            };
            if act == Activation::Identity {
                z - anchor_pre
            } else {
                apply_act(act, z) - apply_act(act, anchor_pre)
            }
        })
        .collect()
}

/// Fully input-convex network graph: returns the output vector nodes.
pub fn ficnn_graph<'t, T: Scalar>(
    tape: &'t Tape<T>,
    spec: &FicnnSpec,
    lay: &FicnnLayout,
    p: &[Var<'t, T>],
    x0: &[Var<'t, T>],
) -> Vec<Var<'t, T>> {
    debug_assert_eq!(x0.len(), spec.input_dim);
    let mut x = x0.to_vec();
    for (l, refs) in lay.layers.iter().enumerate() {
        let act = if l < spec.hidden.len() {
            spec.hidden_act[l]
        } else {
            spec.output_act
        };
        let rows = if l < spec.hidden.len() {
            spec.hidden[l]
        } else {
            spec.output_dim
        };
        let w = refs.w.map(|wre| (wre, x.as_slice()));
        // Borrow checker: materialize the previous layer before moving on.
        let next = ficnn_layer(tape, act, w, refs.v, refs.b, p, x0, rows);
        x = next;
    }
    x
}

/// Anchored dense layer `f(Wx + b) − f(b)`.
fn dense_layer<'t, T: Scalar>(
    tape: &'t Tape<T>,
    act: Activation,
    refs: &DenseLayerRefs,
    p: &[Var<'t, T>],
    x: &[Var<'t, T>],
) -> Vec<Var<'t, T>> {
    (0..refs.w.rows)
        .map(|i| {
            let pairs: Vec<_> = (0..refs.w.cols).map(|j| (p[refs.w.idx(i, j)], x[j])).collect();
            let (z, anchor_pre) = match refs.b {
                Some(bre) => {
                    let bv = p[bre.idx(i, 0)];
                    (tape.dot(&pairs, &[(T::one(), bv)], T::zero()), bv)
                }
                None => (tape.dot(&pairs, &[], T::zero()), tape.constant(T::zero())),
            };
            if act == Activation::Identity {
                z - anchor_pre
            } else {
                apply_act(act, z) - apply_act(act, anchor_pre)
            }
        })
        .collect()
}

/// Auxiliary MLP graph.
pub fn mlp_graph<'t, T: Scalar>(
    tape: &'t Tape<T>,
    spec: &MlpSpec,
    lay: &MlpLayout,
    p: &[Var<'t, T>],
    x0: &[Var<'t, T>],
) -> Vec<Var<'t, T>> {
    debug_assert_eq!(x0.len(), spec.input_dim);
    let mut x = x0.to_vec();
    for (l, refs) in lay.layers.iter().enumerate() {
        let act = if l < spec.hidden.len() {
            spec.act
        } else {
            Activation::Identity
        };
        x = dense_layer(tape, act, refs, p, &x);
    }
    x
}

/// Partially input-convex network graph; scalar output.
///
/// Convex-path terms accumulate first in every pre-activation dot product,
/// followed by the coupling terms in the same order as in the anchor, so the
/// anchored subtraction cancels bit-exactly when the convex inputs are zero.
pub fn picnn_graph<'t, T: Scalar>(
    tape: &'t Tape<T>,
    spec: &PicnnSpec,
    lay: &PicnnLayout,
    p: &[Var<'t, T>],
    xc0: &[Var<'t, T>],
    xp0: &[Var<'t, T>],
) -> Var<'t, T> {
    debug_assert_eq!(xc0.len(), spec.conv_input_dim);
    debug_assert_eq!(xp0.len(), spec.param_input_dim);

    // Parameter branch levels: xp[0] = input, xp[l+1] = gelu-layer(xp[l]).
    let mut xp_levels: Vec<Vec<Var<T>>> = vec![xp0.to_vec()];
    for refs in &lay.param {
        let prev = xp_levels.last().unwrap().clone();
        xp_levels.push(dense_layer(tape, spec.param_act, refs, p, &prev));
    }

    let n_layers = lay.conv.len();
    let mut xc = xc0.to_vec();
    let mut out = None;
    for (l, refs) in lay.conv.iter().enumerate() {
        let xp = &xp_levels[l.min(xp_levels.len() - 1)];
        let is_out = l == n_layers - 1;
        let act = if is_out {
            spec.output_act
        } else {
            spec.conv_act[l]
        };

        // Recurrent gate: x_c ⊙ relu(Wcp·xp + bcp).
        let w_prods: Option<Vec<Var<T>>> = refs.wc.map(|_| {
            let wcp = refs.wcp.unwrap();
            let bcp = refs.bcp.unwrap();
            (0..xc.len())
                .map(|j| {
                    let gp: Vec<_> = (0..wcp.cols).map(|k| (p[wcp.idx(j, k)], xp[k])).collect();
                    let gate = tape
                        .dot(&gp, &[(T::one(), p[bcp.idx(j, 0)])], T::zero())
                        .relu();
                    xc[j] * gate
                })
                .collect()
        });
        // Passthrough gate: x_c0 ⊙ relu(Vcp·xp + ccp).
        let v_prods: Vec<Var<T>> = (0..xc0.len())
            .map(|j| {
                let gp: Vec<_> = (0..refs.vcp.cols)
                    .map(|k| (p[refs.vcp.idx(j, k)], xp[k]))
                    .collect();
                let gate = tape
                    .dot(&gp, &[(T::one(), p[refs.ccp.idx(j, 0)])], T::zero())
                    .relu();
                xc0[j] * gate
            })
            .collect();

        let rows = refs.vc.rows;
        let next: Vec<Var<T>> = (0..rows)
            .map(|i| {
                let mut pairs: Vec<(Var<T>, Var<T>)> = Vec::new();
                if let (Some(wc), Some(prods)) = (refs.wc, w_prods.as_ref()) {
                    for j in 0..wc.cols {
                        pairs.push((p[wc.idx(i, j)], prods[j]));
                    }
                }
                for j in 0..refs.vc.cols {
                    pairs.push((p[refs.vc.idx(i, j)], v_prods[j]));
                }
                match (refs.ucp, refs.bc) {
                    (Some(ucp), Some(bc)) => {
                        // Coupling terms appear identically in main and anchor.
                        let u_pairs: Vec<_> =
                            (0..ucp.cols).map(|k| (p[ucp.idx(i, k)], xp[k])).collect();
                        pairs.extend_from_slice(&u_pairs);
                        let bv = p[bc.idx(i, 0)];
                        let z = tape.dot(&pairs, &[(T::one(), bv)], T::zero());
                        let z0 = tape.dot(&u_pairs, &[(T::one(), bv)], T::zero());
                        apply_act(act, z) - apply_act(act, z0)
                    }
                    _ => {
                        // Output transform: convex terms only, unshifted
                        // activation, no bias.
                        let z = tape.dot(&pairs, &[], T::zero());
                        apply_act(act, z)
                    }
                }
            })
            .collect();
        if is_out {
            out = Some(next[0]);
        } else {
            xc = next;
        }
    }
    out.expect("picnn has at least the output transform")
}

fn check_width(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Config(format!(
            "{name}: expected input width {want}, got {got}"
        )));
    }
    Ok(())
}

fn eval_graph<T: Scalar>(
    n_params: usize,
    params: &[T],
    inputs: &[T],
    build: impl for<'t> FnOnce(&'t Tape<T>, &[Var<'t, T>], &[Var<'t, T>]) -> Vec<Var<'t, T>>,
) -> Result<Vec<T>> {
    let tape = Tape::new();
    let pv = tape.inputs(n_params);
    let xv = tape.inputs(inputs.len());
    let outs = build(&tape, &pv, &xv);
    let out_ids: Vec<u32> = outs.iter().map(|v| v.id).collect();
    let prog = tape.finish();
    let mut ws = prog.workspace();
    for (k, &x) in params.iter().enumerate() {
        ws.values[k] = x;
    }
    for (k, &x) in inputs.iter().enumerate() {
        ws.values[n_params + k] = x;
    }
    prog.forward(&mut ws)?;
    Ok(out_ids.iter().map(|&i| ws.value(i)).collect())
}

/// Plain-value FICNN forward pass: `params` is the flat vector matching `lay`.
pub fn ficnn_forward<T: Scalar>(
    spec: &FicnnSpec,
    lay: &FicnnLayout,
    n_params: usize,
    params: &[T],
    x0: &[T],
) -> Result<Vec<T>> {
    check_width("ficnn_forward", x0.len(), spec.input_dim)?;
    eval_graph(n_params, params, x0, |tape, p, x| {
        ficnn_graph(tape, spec, lay, p, x)
    })
}

/// Plain-value PICNN forward pass (scalar output).
pub fn picnn_forward<T: Scalar>(
    spec: &PicnnSpec,
    lay: &PicnnLayout,
    n_params: usize,
    params: &[T],
    xc: &[T],
    xp: &[T],
) -> Result<T> {
    check_width("picnn_forward (convex branch)", xc.len(), spec.conv_input_dim)?;
    check_width("picnn_forward (parameter branch)", xp.len(), spec.param_input_dim)?;
    let joined: Vec<T> = xc.iter().chain(xp.iter()).copied().collect();
    let nc = xc.len();
    let out = eval_graph(n_params, params, &joined, |tape, p, x| {
        vec![picnn_graph(tape, spec, lay, p, &x[..nc], &x[nc..])]
    })?;
    Ok(out[0])
}

/// Plain-value MLP forward pass.
pub fn mlp_forward<T: Scalar>(
    spec: &MlpSpec,
    lay: &MlpLayout,
    n_params: usize,
    params: &[T],
    x0: &[T],
) -> Result<Vec<T>> {
    check_width("mlp_forward", x0.len(), spec.input_dim)?;
    eval_graph(n_params, params, x0, |tape, p, x| {
        mlp_graph(tape, spec, lay, p, x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::{init_params, FicnnLayout, MlpLayout, ModelLayout, PicnnLayout};
    use crate::net::{NetworkSpec, EXP_CAP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn default_model() -> (NetworkSpec, ModelLayout, Vec<f64>) {
        let spec = NetworkSpec::default();
        let layout = ModelLayout::new(&spec);
        let params = init_params::<f64>(&spec, &layout, 42).data;
        (spec, layout, params)
    }

    #[test]
    fn ficnn_zero_anchoring_is_bit_exact() {
        let (spec, layout, params) = default_model();
        for (s, l) in [
            (&spec.ficnn_fs, &layout.ficnn_fs),
            (&spec.ficnn_f, &layout.ficnn_f),
            (&spec.ficnn_s, &layout.ficnn_s),
        ] {
            let x0 = vec![0.0; s.input_dim];
            let y = ficnn_forward(s, l, layout.n_params, &params, &x0).unwrap();
            assert!(y.iter().all(|&v| v == 0.0), "{y:?}");
        }
        // Randomized parameters (including negative biases) keep anchoring exact.
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut p2 = params.clone();
        for v in p2.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let y = ficnn_forward(
            &spec.ficnn_fs,
            &layout.ficnn_fs,
            layout.n_params,
            &p2,
            &[0.0; 5],
        )
        .unwrap();
        assert_eq!(y[0], 0.0);
    }

    #[test]
    fn single_layer_ficnn_closed_form() {
        // f(x) = softplus(x) − ln 2 with V = [1], b = [0].
        let spec = FicnnSpec {
            input_dim: 1,
            hidden: vec![],
            hidden_act: vec![],
            output_dim: 1,
            output_act: Activation::Softplus,
            output_bias: true,
        };
        let (lay, _info, n) = FicnnLayout::standalone(&spec);
        let mut params = vec![0.0; n];
        params[lay.layers[0].v.idx(0, 0)] = 1.0;
        let f1 = ficnn_forward(&spec, &lay, n, &params, &[1.0]).unwrap()[0];
        let expect = crate::scalar::softplus(1.0f64) - std::f64::consts::LN_2;
        assert!((f1 - expect).abs() < 1e-15);
        assert!((f1 - 0.62011).abs() < 5e-6);
    }

    #[test]
    fn ficnn_secant_convexity() {
        let (spec, layout, _) = default_model();
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for trial in 0..200 {
            // Random feasible parameters: kernels positive, biases free.
            let mut params = init_params::<f64>(&spec, &layout, trial).data;
            for t in &layout.tensors {
                if t.lower_bound.is_none() {
                    for k in 0..t.re.len() {
                        params[t.re.offset + k] = rng.gen_range(-0.8..0.8);
                    }
                }
            }
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lam = 0.4;
            let mid: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| lam * a + (1.0 - lam) * b)
                .collect();
            let s = &spec.ficnn_fs;
            let l = &layout.ficnn_fs;
            let fx = ficnn_forward(s, l, layout.n_params, &params, &x).unwrap();
            let fy = ficnn_forward(s, l, layout.n_params, &params, &y).unwrap();
            let fm = ficnn_forward(s, l, layout.n_params, &params, &mid).unwrap();
            for i in 0..fx.len() {
                assert!(
                    fm[i] <= lam * fx[i] + (1.0 - lam) * fy[i] + 1e-12,
                    "trial {trial}: secant violated"
                );
            }
        }
    }

    #[test]
    fn ficnn_monotonicity_under_nonneg_weights() {
        let (spec, layout, params) = default_model();
        let s = &spec.ficnn_fs;
        let l = &layout.ficnn_fs;
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f0 = ficnn_forward(s, l, layout.n_params, &params, &x).unwrap()[0];
            let i = rng.gen_range(0..5);
            let mut xp = x.clone();
            xp[i] += rng.gen_range(1e-3..0.5);
            let f1 = ficnn_forward(s, l, layout.n_params, &params, &xp).unwrap()[0];
            assert!(f1 >= f0 - 1e-12, "monotonicity violated in component {i}");
        }
    }

    #[test]
    fn picnn_anchoring_and_nonnegativity() {
        let (spec, layout, params) = default_model();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..50 {
            let xp: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = picnn_forward(
                &spec.picnn_g,
                &layout.picnn_g,
                layout.n_params,
                &params,
                &[0.0, 0.0, 0.0],
                &xp,
            )
            .unwrap();
            assert_eq!(y, 0.0, "xc = 0 must give exactly zero");
            let xc: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let y = picnn_forward(
                &spec.picnn_g,
                &layout.picnn_g,
                layout.n_params,
                &params,
                &xc,
                &xp,
            )
            .unwrap();
            assert!(y >= 0.0);
        }
    }

    #[test]
    fn picnn_direct_formula_transcription_at_zero_param_branch() {
        // With xp = 0, gates reduce to relu of their biases and the coupling
        // terms to relu(b-terms); verify against an independent transcription
        // of the recursion for a width-1 network.
        let spec = PicnnSpec {
            conv_input_dim: 1,
            conv_hidden: vec![1],
            conv_act: vec![Activation::Softplus],
            param_input_dim: 1,
            param_hidden: vec![1],
            param_act: Activation::Gelu,
            output_act: Activation::Relu,
        };
        let (lay, _info, n) = PicnnLayout::standalone(&spec);
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let mut params: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.9)).collect();
        // Make one gate bias negative to exercise the relu.
        params[lay.conv[1].ccp.idx(0, 0)] = -0.2;
        let xc = 0.7;
        let y = picnn_forward(&spec, &lay, n, &params, &[xc], &[0.0]).unwrap();

        let g = |re: super::TensorRef, i: usize, j: usize| params[re.idx(i, j)];
        let relu = |x: f64| x.max(0.0);
        let sp = crate::scalar::softplus::<f64>;
        // Layer 0: x1 = sp(v0·(xc·relu(c0)) + u0·0 + b0) − sp(b0)  [xp = 0]
        let l0 = &lay.conv[0];
        let gate0 = relu(g(l0.ccp, 0, 0));
        let z0 = g(l0.vc, 0, 0) * (xc * gate0);
        let b0 = g(l0.bc.unwrap(), 0, 0);
        let x1 = sp(z0 + b0) - sp(b0);
        // Output: relu(w·(x1·relu(bcp)) + v·(xc·relu(ccp)))
        let l1 = &lay.conv[1];
        let gate_w = relu(g(l1.bcp.unwrap(), 0, 0));
        let gate_v = relu(g(l1.ccp, 0, 0));
        let expect = relu(
            g(l1.wc.unwrap(), 0, 0) * (x1 * gate_w) + g(l1.vc, 0, 0) * (xc * gate_v),
        );
        assert!((y - expect).abs() < 1e-14, "y = {y}, expect = {expect}");
    }

    #[test]
    fn picnn_partial_convexity_secant() {
        let (spec, layout, _) = default_model();
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for trial in 0..1000u64 {
            let params = {
                let mut p = init_params::<f64>(&spec, &layout, 100 + trial).data;
                for t in &layout.tensors {
                    if t.lower_bound.is_none() {
                        for k in 0..t.re.len() {
                            p[t.re.offset + k] = rng.gen_range(-0.8..0.8);
                        }
                    }
                }
                p
            };
            let xp: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.5)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.5)).collect();
            let lam: f64 = rng.gen_range(0.0..1.0);
            let mid: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| lam * x + (1.0 - lam) * y)
                .collect();
            let f = |xc: &[f64]| {
                picnn_forward(
                    &spec.picnn_g,
                    &layout.picnn_g,
                    layout.n_params,
                    &params,
                    xc,
                    &xp,
                )
                .unwrap()
            };
            assert!(
                f(&mid) <= lam * f(&a) + (1.0 - lam) * f(&b) + 1e-12,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn mlp_closed_form_and_anchoring() {
        let spec = MlpSpec {
            input_dim: 1,
            hidden: vec![1],
            act: Activation::Tanh,
            output_dim: 1,
            output_bias: true,
        };
        let (lay, _info, n) = MlpLayout::standalone(&spec);
        let mut params = vec![0.0; n];
        params[lay.layers[0].w.idx(0, 0)] = 2.0;
        params[lay.layers[0].b.unwrap().idx(0, 0)] = 1.0;
        params[lay.layers[1].w.idx(0, 0)] = 1.0;
        // Hidden: tanh(2x+1) − tanh(1); output layer is identity-anchored.
        let y = mlp_forward(&spec, &lay, n, &params, &[1.0]).unwrap()[0];
        let expect = 3.0f64.tanh() - 1.0f64.tanh();
        assert!((y - expect).abs() < 1e-15);
        assert!((y - 0.2334606).abs() < 5e-7);
        let y0 = mlp_forward(&spec, &lay, n, &params, &[0.0]).unwrap()[0];
        assert_eq!(y0, 0.0);
    }

    #[test]
    fn mlp_gradient_matches_fd() {
        let (spec, layout, params) = default_model();
        let s = &spec.mlp_s;
        let l = &layout.mlp_s;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let grads = crate::diff::grad(
                |tape, v| {
                    let pv: Vec<_> = params.iter().map(|&w| tape.constant(w)).collect();
                    mlp_graph(tape, s, l, &pv, v)[0]
                },
                &x,
            )
            .unwrap();
            for i in 0..x.len() {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fp = mlp_forward(s, l, layout.n_params, &params, &xp).unwrap()[0];
                let fm = mlp_forward(s, l, layout.n_params, &params, &xm).unwrap()[0];
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (grads[i] - fd).abs() / fd.abs().max(1e-4) < 1e-6,
                    "engine {} vs fd {}",
                    grads[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn exp_activation_saturates_without_overflow() {
        let spec = FicnnSpec {
            input_dim: 1,
            hidden: vec![1],
            hidden_act: vec![Activation::Exp],
            output_dim: 1,
            output_act: Activation::Identity,
            output_bias: true,
        };
        let (lay, _info, n) = FicnnLayout::standalone(&spec);
        let mut params = vec![0.0f64; n];
        params[lay.layers[0].v.idx(0, 0)] = 10.0;
        params[lay.layers[1].w.unwrap().idx(0, 0)] = 1.0;
        params[lay.layers[1].v.idx(0, 0)] = 1e-7;
        // Pre-activation 10·100 = 1000 ≫ cap; output stays finite and the
        // linear extension keeps growing.
        let y1 = ficnn_forward(&spec, &lay, n, &params, &[100.0]).unwrap()[0];
        let y2 = ficnn_forward(&spec, &lay, n, &params, &[101.0]).unwrap()[0];
        assert!(y1.is_finite() && y2.is_finite());
        assert!(y2 > y1);
        assert!(y1 > EXP_CAP.exp());
    }

    #[test]
    fn width_mismatch_is_configuration_error() {
        let (spec, layout, params) = default_model();
        let err = ficnn_forward(
            &spec.ficnn_fs,
            &layout.ficnn_fs,
            layout.n_params,
            &params,
            &[0.0; 3],
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
