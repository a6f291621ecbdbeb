//! Replayable evaluator for a potential model: frozen tape templates for the
//! energy, dissipation and entropy networks, the cached normalization
//! constants, state-law evaluation and the Newton entropy inversion.
//!
//! Templates are built once per parameter state; evaluations rebind a handful
//! of input slots and replay values into per-worker buffers, so quadrature
//! loops allocate nothing.

use crate::diff::{Program, Tape, Workspace};
use crate::error::{Error, Result};
use crate::kinematics::{
    dissipation_invariant_derivatives, dissipation_invariants, invariant_derivatives, invariants,
    InvariantSet, Tensor2, Vec3,
};
use crate::net::{ficnn_graph, mlp_graph, picnn_graph};
use crate::scalar::{c, Scalar};

use super::{growth_energy, growth_energy_stress, NTMode, PotentialModel};

/// Input slot ids of the energy template.
#[derive(Debug, Clone, Copy)]
struct EnergySlots {
    i1b: u32,
    i2b: u32,
    jb: u32,
    egr: u32,
    s: u32,
    np: u32,
    nt: u32,
}

/// Output node ids of the energy template.
#[derive(Debug, Clone, Copy)]
struct EnergyOuts {
    /// ě = n_T (ê + e_gr − n_P J̄), scaled units.
    e_bar: u32,
    /// n_T ∂ê/∂Ī1, n_T ∂ê/∂Ī2, n_T (∂ê/∂J̄ − ∂ê/∂(−J̄)).
    a: u32,
    b: u32,
    c: u32,
    /// T̂ = n_T ∂ê/∂s.
    t_hat: u32,
    /// ∂T̂/∂s = n_T ∂²ê/∂s².
    t_hat_s: u32,
    /// Raw auxiliary energy and its derivatives (n_T not applied).
    e_hat: u32,
    raw_a: u32,
    raw_b: u32,
    raw_c: u32,
    raw_gs: u32,
}

#[derive(Debug, Clone, Copy)]
struct DissSlots {
    i4: u32,
    i5: u32,
    i6: u32,
    jb: u32,
    s: u32,
}

#[derive(Debug, Clone, Copy)]
struct DissOuts {
    phi: u32,
    d4: u32,
    d5: u32,
    d6: u32,
}

#[derive(Debug, Clone, Copy)]
struct MlpSlots {
    i1b: u32,
    i2b: u32,
    jb: u32,
    tbar: u32,
    out: u32,
}

/// Frozen templates plus cached normalization constants for one parameter
/// state. Immutable and `Sync`; share across workers with one [`EvalCtx`]
/// each.
pub struct ModelEval<T> {
    energy: Program<T>,
    diss: Program<T>,
    mlp: Program<T>,
    e_slots: EnergySlots,
    e_outs: EnergyOuts,
    d_slots: DissSlots,
    d_outs: DissOuts,
    m_slots: MlpSlots,
    n_params: usize,
    params: Vec<T>,
    /// Stress normalization at (I, 0): 2 ∂ê/∂I1 + 4 ∂ê/∂I2 + ∂ê/∂J.
    pub n_p: T,
    /// Temperature normalization n_T (scaled units; 1 in fixed mode).
    pub n_t: T,
    /// ∂ê/∂s at the rest state (diagnostic).
    pub rest_gs: T,
    pub norm: super::Normalization<T>,
}

/// Per-worker replay buffers.
pub struct EvalCtx<T> {
    energy: Workspace<T>,
    diss: Workspace<T>,
    mlp: Workspace<T>,
}

/// Full state-law evaluation at one material state (physical units).
#[derive(Debug, Clone, Copy)]
pub struct StateEval<T> {
    pub e: T,
    pub piola: Tensor2<T>,
    pub temperature: T,
    pub q: Vec3<T>,
    pub phi: T,
    /// ∂²e/∂s² (physical), positive for a valid model.
    pub de_ds2: T,
}

/// Converged entropy solve with the logged residual history.
#[derive(Debug, Clone)]
pub struct EntropySolve<T> {
    pub s: T,
    pub iterations: usize,
    /// |T_target − T(s_k)| per iteration, physical units.
    pub residuals: Vec<T>,
}

impl<T: Scalar> ModelEval<T> {
    pub fn new(model: &PotentialModel<T>) -> Result<Self> {
        let n_params = model.layout.n_params;

        // Energy template: ê, its input derivatives, and the s-curvature.
        let (energy, e_slots, e_outs) = {
            let tape = Tape::new();
            let p = tape.inputs(n_params);
            let i1b = tape.input();
            let i2b = tape.input();
            let jb = tape.input();
            let egr = tape.input();
            let s = tape.input();
            let np = tape.input();
            let nt = tape.input();
            let neg_jb = -jb;
            let x_fs = [i1b, i2b, jb, neg_jb, s];
            let e_fs = ficnn_graph(&tape, &model.spec.ficnn_fs, &model.layout.ficnn_fs, &p, &x_fs)
                [0];
            let feats_f = ficnn_graph(
                &tape,
                &model.spec.ficnn_f,
                &model.layout.ficnn_f,
                &p,
                &[i1b, i2b, jb, neg_jb],
            );
            let feats_s =
                ficnn_graph(&tape, &model.spec.ficnn_s, &model.layout.ficnn_s, &p, &[s]);
            // Product term with per-feature normalization: softplus(0)² is
            // built from the same primitive so the rest state cancels exactly.
            let sp0 = tape.constant(T::zero()).softplus();
            let sp0_sq = sp0 * sp0;
            let mut e_hat = e_fs;
            for i in 0..feats_f.len() {
                let term = feats_f[i].softplus() * feats_s[i].softplus() - sp0_sq;
                e_hat = e_hat + term;
            }
            // The adjoint of J̄ already carries the −J̄ channel through the
            // negation node, so adj[2] is the total J-sensitivity.
            let adj = tape.adjoint(e_hat, &[i1b, i2b, jb, s]);
            let (raw_a, raw_b, raw_c, raw_gs) = (adj[0], adj[1], adj[2], adj[3]);
            let gss = tape.adjoint(raw_gs, &[s])[0];
            let e_bar = nt * (e_hat + egr - np * jb);
            let a = nt * raw_a;
            let b = nt * raw_b;
            let c_out = nt * raw_c;
            let t_hat = nt * raw_gs;
            let t_hat_s = nt * gss;
            let slots = EnergySlots {
                i1b: i1b.id,
                i2b: i2b.id,
                jb: jb.id,
                egr: egr.id,
                s: s.id,
                np: np.id,
                nt: nt.id,
            };
            let outs = EnergyOuts {
                e_bar: e_bar.id,
                a: a.id,
                b: b.id,
                c: c_out.id,
                t_hat: t_hat.id,
                t_hat_s: t_hat_s.id,
                e_hat: e_hat.id,
                raw_a: raw_a.id,
                raw_b: raw_b.id,
                raw_c: raw_c.id,
                raw_gs: raw_gs.id,
            };
            (tape.finish(), slots, outs)
        };

        // Dissipation template.
        let (diss, d_slots, d_outs) = {
            let tape = Tape::new();
            let p = tape.inputs(n_params);
            let i4 = tape.input();
            let i5 = tape.input();
            let i6 = tape.input();
            let jb = tape.input();
            let s = tape.input();
            let phi = picnn_graph(
                &tape,
                &model.spec.picnn_g,
                &model.layout.picnn_g,
                &p,
                &[i4, i5, i6],
                &[jb, s],
            );
            let adj = tape.adjoint(phi, &[i4, i5, i6]);
            let slots = DissSlots {
                i4: i4.id,
                i5: i5.id,
                i6: i6.id,
                jb: jb.id,
                s: s.id,
            };
            let outs = DissOuts {
                phi: phi.id,
                d4: adj[0].id,
                d5: adj[1].id,
                d6: adj[2].id,
            };
            (tape.finish(), slots, outs)
        };

        // Auxiliary entropy MLP template.
        let (mlp, m_slots) = {
            let tape = Tape::new();
            let p = tape.inputs(n_params);
            let i1b = tape.input();
            let i2b = tape.input();
            let jb = tape.input();
            let tbar = tape.input();
            let s = mlp_graph(
                &tape,
                &model.spec.mlp_s,
                &model.layout.mlp_s,
                &p,
                &[i1b, i2b, jb, tbar],
            )[0];
            let slots = MlpSlots {
                i1b: i1b.id,
                i2b: i2b.id,
                jb: jb.id,
                tbar: tbar.id,
                out: s.id,
            };
            (tape.finish(), slots)
        };

        let mut me = ModelEval {
            energy,
            diss,
            mlp,
            e_slots,
            e_outs,
            d_slots,
            d_outs,
            m_slots,
            n_params,
            params: model.params.data.clone(),
            n_p: T::zero(),
            n_t: T::one(),
            rest_gs: T::one(),
            norm: model.norm,
        };

        // Normalization constants from the rest state (I, 0): replay the
        // energy template with zero inputs, n_P = 0, n_T = 1.
        let mut ctx = me.new_ctx();
        me.bind_energy(&mut ctx, T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        ctx.energy.bind(me.e_slots.np, T::zero());
        ctx.energy.bind(me.e_slots.nt, T::one());
        me.energy.forward(&mut ctx.energy)?;
        let two = c::<T>(2.0);
        let four = c::<T>(4.0);
        let n_p = two * ctx.energy.value(me.e_outs.raw_a)
            + four * ctx.energy.value(me.e_outs.raw_b)
            + ctx.energy.value(me.e_outs.raw_c);
        let rest_gs = ctx.energy.value(me.e_outs.raw_gs);
        let n_t = match me.norm.n_t_mode {
            NTMode::Computed => {
                if !(rest_gs > T::zero()) || !rest_gs.is_finite() {
                    return Err(Error::ModelInvalid(format!(
                        "∂ê/∂s at the rest state is {rest_gs}; temperature normalization undefined"
                    )));
                }
                me.norm.t0_hat() / rest_gs
            }
            NTMode::Fixed => T::one(),
        };
        me.n_p = n_p;
        me.n_t = n_t;
        me.rest_gs = rest_gs;
        Ok(me)
    }

    /// Fresh per-worker buffers with parameters pre-bound.
    pub fn new_ctx(&self) -> EvalCtx<T> {
        let mut ctx = EvalCtx {
            energy: self.energy.workspace(),
            diss: self.diss.workspace(),
            mlp: self.mlp.workspace(),
        };
        for (k, &v) in self.params.iter().enumerate() {
            ctx.energy.values[k] = v;
            ctx.diss.values[k] = v;
            ctx.mlp.values[k] = v;
        }
        let _ = self.n_params;
        ctx
    }

    fn bind_energy(&self, ctx: &mut EvalCtx<T>, i1b: T, i2b: T, jb: T, egr: T, s: T) {
        let sl = &self.e_slots;
        ctx.energy.bind(sl.i1b, i1b);
        ctx.energy.bind(sl.i2b, i2b);
        ctx.energy.bind(sl.jb, jb);
        ctx.energy.bind(sl.egr, egr);
        ctx.energy.bind(sl.s, s);
        ctx.energy.bind(sl.np, self.n_p);
        ctx.energy.bind(sl.nt, self.n_t);
    }

    /// Replays the energy template at shifted invariants and entropy.
    /// Returns `(ě, a, b, c, T̂, ∂T̂/∂s, ê)` in scaled units.
    fn energy_at(
        &self,
        ctx: &mut EvalCtx<T>,
        inv: &InvariantSet<T>,
        s: T,
    ) -> Result<(T, T, T, T, T, T, T)> {
        let egr = growth_energy(inv, self.norm.eps_gr);
        self.bind_energy(ctx, inv.i1_bar, inv.i2_bar, inv.j_bar, egr, s);
        self.energy.forward(&mut ctx.energy)?;
        let o = &self.e_outs;
        Ok((
            ctx.energy.value(o.e_bar),
            ctx.energy.value(o.a),
            ctx.energy.value(o.b),
            ctx.energy.value(o.c),
            ctx.energy.value(o.t_hat),
            ctx.energy.value(o.t_hat_s),
            ctx.energy.value(o.e_hat),
        ))
    }

    /// Auxiliary energy ê(F, s) (scaled units, no n_T applied).
    pub fn auxiliary_energy(&self, ctx: &mut EvalCtx<T>, f: &Tensor2<T>, s: T) -> Result<T> {
        let inv = invariants(f)?;
        Ok(self.energy_at(ctx, &inv, s)?.6)
    }

    /// ê at explicit shifted-invariant inputs (network-level probing; the
    /// fourth channel −J̄ is derived from J̄ on the template).
    pub fn auxiliary_energy_at_inputs(
        &self,
        ctx: &mut EvalCtx<T>,
        i1b: T,
        i2b: T,
        jb: T,
        s: T,
    ) -> Result<T> {
        self.bind_energy(ctx, i1b, i2b, jb, T::zero(), s);
        self.energy.forward(&mut ctx.energy)?;
        Ok(ctx.energy.value(self.e_outs.e_hat))
    }

    /// Internal energy e(F, s), physical units.
    pub fn internal_energy(&self, ctx: &mut EvalCtx<T>, f: &Tensor2<T>, s: T) -> Result<T> {
        let inv = invariants(f)?;
        let (e_bar, ..) = self.energy_at(ctx, &inv, s)?;
        Ok(self.norm.t_scale * e_bar)
    }

    /// Piola stress P = ∂e/∂F, physical units.
    pub fn piola_stress(&self, ctx: &mut EvalCtx<T>, f: &Tensor2<T>, s: T) -> Result<Tensor2<T>> {
        let inv = invariants(f)?;
        let (_, a, b, c_j, ..) = self.energy_at(ctx, &inv, s)?;
        Ok(self.assemble_stress(f, a, b, c_j))
    }

    fn assemble_stress(&self, f: &Tensor2<T>, a: T, b: T, c_j: T) -> Tensor2<T> {
        let (d1, d2, dj) = invariant_derivatives(f);
        let egr_p = growth_energy_stress(f, self.norm.eps_gr);
        let p_bar = d1
            .scale(a)
            .add(&d2.scale(b))
            .add(&dj.scale(c_j - self.n_t * self.n_p))
            .add(&egr_p.scale(self.n_t));
        p_bar.scale(self.norm.t_scale)
    }

    /// Temperature T = ∂e/∂s > 0, physical units.
    pub fn temperature_of(&self, ctx: &mut EvalCtx<T>, f: &Tensor2<T>, s: T) -> Result<T> {
        let inv = invariants(f)?;
        let (_, _, _, _, t_hat, ..) = self.energy_at(ctx, &inv, s)?;
        let t = self.norm.t_scale * t_hat;
        if !(t > T::zero()) {
            return Err(Error::ModelInvalid(format!(
                "non-positive temperature {t} at s = {s}"
            )));
        }
        Ok(t)
    }

    /// Dissipation potential φ(g; F, s) ≥ 0, physical units.
    pub fn dissipation_potential(
        &self,
        ctx: &mut EvalCtx<T>,
        g: &Vec3<T>,
        f: &Tensor2<T>,
        s: T,
    ) -> Result<T> {
        let di = dissipation_invariants(g, f)?;
        let jb = f.det() - T::one();
        let (phi, ..) = self.diss_at(ctx, di.i4_bar, di.i5_bar, di.i6_bar, jb, s)?;
        Ok(self.norm.t_scale * phi)
    }

    fn diss_at(
        &self,
        ctx: &mut EvalCtx<T>,
        i4: T,
        i5: T,
        i6: T,
        jb: T,
        s: T,
    ) -> Result<(T, T, T, T)> {
        let sl = &self.d_slots;
        ctx.diss.bind(sl.i4, i4);
        ctx.diss.bind(sl.i5, i5);
        ctx.diss.bind(sl.i6, i6);
        ctx.diss.bind(sl.jb, jb);
        ctx.diss.bind(sl.s, s);
        self.diss.forward(&mut ctx.diss)?;
        let o = &self.d_outs;
        Ok((
            ctx.diss.value(o.phi),
            ctx.diss.value(o.d4),
            ctx.diss.value(o.d5),
            ctx.diss.value(o.d6),
        ))
    }

    /// Heat flux q = ∂φ/∂g, physical units; exactly zero at g = 0.
    pub fn heat_flux(
        &self,
        ctx: &mut EvalCtx<T>,
        g: &Vec3<T>,
        f: &Tensor2<T>,
        s: T,
    ) -> Result<Vec3<T>> {
        let di = dissipation_invariants(g, f)?;
        if !(di.i4_bar > T::zero()) {
            return Ok(Vec3::zero());
        }
        let jb = f.det() - T::one();
        let (_, d4, d5, d6) = self.diss_at(ctx, di.i4_bar, di.i5_bar, di.i6_bar, jb, s)?;
        let (n4, n5, n6) = dissipation_invariant_derivatives(g, f);
        Ok(n4
            .scale(d4)
            .add(&n5.scale(d5))
            .add(&n6.scale(d6))
            .scale(self.norm.t_scale))
    }

    /// Entropy prediction of the auxiliary MLP at (F, T).
    pub fn entropy_mlp_predict(&self, ctx: &mut EvalCtx<T>, f: &Tensor2<T>, t: T) -> Result<T> {
        if !(t > T::zero()) {
            return Err(Error::domain("entropy_mlp_predict", "T must be positive"));
        }
        let inv = invariants(f)?;
        let tbar = (t - self.norm.t0) / self.norm.t_scale;
        let sl = &self.m_slots;
        ctx.mlp.bind(sl.i1b, inv.i1_bar);
        ctx.mlp.bind(sl.i2b, inv.i2_bar);
        ctx.mlp.bind(sl.jb, inv.j_bar);
        ctx.mlp.bind(sl.tbar, tbar);
        self.mlp.forward(&mut ctx.mlp)?;
        Ok(ctx.mlp.value(sl.out))
    }

    /// Full state-law evaluation (physical units) at given entropy.
    pub fn state_eval(
        &self,
        ctx: &mut EvalCtx<T>,
        f: &Tensor2<T>,
        s: T,
        g: &Vec3<T>,
    ) -> Result<StateEval<T>> {
        let inv = invariants(f)?;
        let (e_bar, a, b, c_j, t_hat, t_hat_s, _) = self.energy_at(ctx, &inv, s)?;
        let piola = self.assemble_stress(f, a, b, c_j);
        let di = dissipation_invariants(g, f)?;
        let (phi, d4, d5, d6) = self.diss_at(ctx, di.i4_bar, di.i5_bar, di.i6_bar, inv.j_bar, s)?;
        let q = if di.i4_bar > T::zero() {
            let (n4, n5, n6) = dissipation_invariant_derivatives(g, f);
            n4.scale(d4)
                .add(&n5.scale(d5))
                .add(&n6.scale(d6))
                .scale(self.norm.t_scale)
        } else {
            Vec3::zero()
        };
        Ok(StateEval {
            e: self.norm.t_scale * e_bar,
            piola,
            temperature: self.norm.t_scale * t_hat,
            q,
            phi: self.norm.t_scale * phi,
            de_ds2: self.norm.t_scale * t_hat_s,
        })
    }

    /// Temperature and its entropy-derivative at (invariants, s), scaled to
    /// physical units. Fast path for the Newton solve.
    fn t_and_slope(&self, ctx: &mut EvalCtx<T>, inv: &InvariantSet<T>, s: T) -> Result<(T, T)> {
        let (_, _, _, _, t_hat, t_hat_s, _) = self.energy_at(ctx, inv, s)?;
        Ok((self.norm.t_scale * t_hat, self.norm.t_scale * t_hat_s))
    }
}

/// Newton inversion of `∂e/∂s = T_target` with bisection rescue.
///
/// `tol` is on the physical temperature residual (defaults in callers:
/// `1e-10·T0`). The temperature is strictly increasing in `s`, so the root is
/// unique; on Newton divergence a bracket is grown geometrically and bisected
/// until Newton re-enters its convergence basin.
pub fn solve_entropy<T: Scalar>(
    eval: &ModelEval<T>,
    ctx: &mut EvalCtx<T>,
    f: &Tensor2<T>,
    t_target: T,
    s_init: T,
    tol: T,
    max_iter: usize,
) -> Result<EntropySolve<T>> {
    if !(t_target > T::zero()) {
        return Err(Error::domain("solve_entropy", "target temperature must be positive"));
    }
    let inv = invariants(f)?;
    let mut s = s_init;
    let mut residuals = Vec::with_capacity(max_iter);
    // Bracket endpoints (lo: T(s) < T_target, hi: T(s) > T_target).
    let mut lo: Option<T> = None;
    let mut hi: Option<T> = None;
    let mut prev_abs: Option<T> = None;

    for iter in 0..max_iter {
        let (t, slope) = eval.t_and_slope(ctx, &inv, s)?;
        if !(slope > T::zero()) || !t.is_finite() {
            return Err(Error::ModelInvalid(format!(
                "∂²e/∂s² = {slope} not positive during entropy solve"
            )));
        }
        let r = t - t_target;
        residuals.push(r.abs());
        if r.abs() < tol {
            return Ok(EntropySolve {
                s,
                iterations: iter + 1,
                residuals,
            });
        }
        if r < T::zero() {
            lo = Some(lo.map_or(s, |v: T| v.max(s)));
        } else {
            hi = Some(hi.map_or(s, |v: T| v.min(s)));
        }
        let newton = s - r / slope;
        let diverging = prev_abs.map_or(false, |p| r.abs() > p * c::<T>(4.0));
        prev_abs = Some(r.abs());
        s = match (lo, hi) {
            (Some(l), Some(h)) => {
                if newton > l && newton < h && !diverging {
                    newton
                } else {
                    (l + h) * c::<T>(0.5)
                }
            }
            (Some(l), None) => {
                if newton.is_finite() && newton > l {
                    newton
                } else {
                    // Grow upward geometrically.
                    let step = (l.abs() + T::one()) * c::<T>(2.0);
                    l + step
                }
            }
            (None, Some(h)) => {
                if newton.is_finite() && newton < h {
                    newton
                } else {
                    let step = (h.abs() + T::one()) * c::<T>(2.0);
                    h - step
                }
            }
            (None, None) => newton,
        };
        if !s.is_finite() {
            return Err(Error::NonFinite("solve_entropy iterate"));
        }
    }
    Err(Error::Convergence {
        solver: "solve_entropy",
        iterations: max_iter,
        residual: residuals.last().map(|r| r.to_f64().unwrap()).unwrap_or(f64::NAN),
    })
}
