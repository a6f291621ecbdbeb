//! Constitutive interface of the element loop, with adapters for the
//! analytic reference models and the learned potentials.

use crate::constitutive::{solve_entropy, EvalCtx, ModelEval};
use crate::error::Result;
use crate::refmodels::RefModel;
use crate::{Real, Tensor2, Vec3};

/// State-law outputs consumed by the element residual.
#[derive(Debug, Clone, Copy)]
pub struct QpOutputs {
    pub piola: Tensor2,
    /// Model temperature ∂e/∂s at the evaluated entropy, K.
    pub temperature: Real,
    /// Referential heat flux, mW/mm².
    pub q: Vec3,
    /// Internal energy density, mJ/mm³.
    pub e: Real,
}

/// Per-worker constitutive evaluation (owns whatever buffers it needs).
pub trait ConstitutiveWorker {
    /// Entropy at (F, T) from the local state law; `s_guess` warm-starts
    /// iterative solvers.
    fn entropy(&mut self, f: &Tensor2, t: Real, s_guess: Real) -> Result<Real>;

    /// Stress, temperature, heat flux and energy at (F, s, g).
    fn state(&mut self, f: &Tensor2, s: Real, g: &Vec3) -> Result<QpOutputs>;
}

/// Thread-safe factory handing out per-worker evaluators.
pub trait ConstitutiveModel: Sync {
    fn worker(&self) -> Box<dyn ConstitutiveWorker + '_>;
}

// ---------------------------------------------------------------- reference

struct RefWorker {
    model: RefModel<Real>,
}

impl ConstitutiveWorker for RefWorker {
    fn entropy(&mut self, f: &Tensor2, t: Real, _s_guess: Real) -> Result<Real> {
        self.model.entropy(f, t)
    }

    fn state(&mut self, f: &Tensor2, s: Real, g: &Vec3) -> Result<QpOutputs> {
        let t = self.model.temperature_from_entropy(f, s)?;
        Ok(QpOutputs {
            piola: self.model.stress(f, t)?,
            temperature: t,
            q: self.model.heat_flux(g, f, t)?,
            e: self.model.internal_energy(f, t)?,
        })
    }
}

impl ConstitutiveModel for RefModel<Real> {
    fn worker(&self) -> Box<dyn ConstitutiveWorker + '_> {
        Box::new(RefWorker { model: *self })
    }
}

// ------------------------------------------------------------------- neural

/// Entropy evaluation mode of the learned model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMode {
    /// Newton inversion of the state law (inference default).
    Newton,
    /// Auxiliary MLP prediction (training surrogate).
    Mlp,
}

/// Learned model adapter; holds the frozen evaluator.
pub struct NeuralModel {
    pub eval: ModelEval<Real>,
    pub mode: EntropyMode,
    /// Newton tolerance on the temperature residual, K.
    pub tol: Real,
    pub max_iter: usize,
}

impl NeuralModel {
    pub fn new(eval: ModelEval<Real>, mode: EntropyMode) -> Self {
        let tol = 1e-10 * eval.norm.t0;
        NeuralModel {
            eval,
            mode,
            tol,
            max_iter: 60,
        }
    }
}

struct NeuralWorker<'m> {
    model: &'m NeuralModel,
    ctx: EvalCtx<Real>,
}

impl ConstitutiveWorker for NeuralWorker<'_> {
    fn entropy(&mut self, f: &Tensor2, t: Real, s_guess: Real) -> Result<Real> {
        match self.model.mode {
            EntropyMode::Newton => Ok(solve_entropy(
                &self.model.eval,
                &mut self.ctx,
                f,
                t,
                s_guess,
                self.model.tol,
                self.model.max_iter,
            )?
            .s),
            EntropyMode::Mlp => self.model.eval.entropy_mlp_predict(&mut self.ctx, f, t),
        }
    }

    fn state(&mut self, f: &Tensor2, s: Real, g: &Vec3) -> Result<QpOutputs> {
        let st = self.model.eval.state_eval(&mut self.ctx, f, s, g)?;
        Ok(QpOutputs {
            piola: st.piola,
            temperature: st.temperature,
            q: st.q,
            e: st.e,
        })
    }
}

impl ConstitutiveModel for NeuralModel {
    fn worker(&self) -> Box<dyn ConstitutiveWorker + '_> {
        Box::new(NeuralWorker {
            model: self,
            ctx: self.eval.new_ctx(),
        })
    }
}
