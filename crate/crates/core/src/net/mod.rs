//! Zero-anchored input-convex networks and the auxiliary entropy MLP.
//!
//! Three architectures are provided, all anchored so the output vanishes
//! bit-exactly at zero input:
//!
//! - FICNN — fully input-convex network; recurrent kernels `W` and
//!   passthrough kernels `V` are constrained non-negative (strictly positive
//!   for the energy networks) and activations are convex non-decreasing, so
//!   the output is convex and non-decreasing in every input component.
//! - PICNN — partially input-convex network; convex in the gated branch for
//!   any value of the unconstrained parameter branch.
//! - MLP — unconstrained perceptron used for entropy prediction during
//!   training.
//!
//! Hard parameter constraints are enforced by projection after every
//! optimizer step, never by reparameterization.

pub mod checkpoint;
pub mod forward;
pub mod params;

pub use forward::{ficnn_forward, ficnn_graph, mlp_forward, mlp_graph, picnn_forward, picnn_graph};
pub use params::{
    init_params, project_constraints, ModelLayout, ParamVec, Subnet, TensorInfo, TensorRef,
};

use serde::{Deserialize, Serialize};

/// Activation tags used by the layer specifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Exponential with linear extension above [`EXP_CAP`].
    Exp,
    Softplus,
    Relu,
    Gelu,
    Tanh,
    Identity,
}

/// Saturation threshold of the `exp` activation; the activation continues
/// linearly (slope `exp(EXP_CAP)`) above it so training cannot overflow.
pub const EXP_CAP: f64 = 30.0;

/// Lower bound for energy-network kernels (strict positivity guard).
pub const ENERGY_KERNEL_BOUND: f64 = 1e-7;

/// Fully input-convex network specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FicnnSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub hidden_act: Vec<Activation>,
    pub output_dim: usize,
    pub output_act: Activation,
    pub output_bias: bool,
}

/// Partially input-convex network specification (convex trunk + coupling branch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicnnSpec {
    pub conv_input_dim: usize,
    pub conv_hidden: Vec<usize>,
    pub conv_act: Vec<Activation>,
    pub param_input_dim: usize,
    pub param_hidden: Vec<usize>,
    pub param_act: Activation,
    /// Output activation; applied without anchoring shift and without bias so
    /// a non-negative activation yields a non-negative, zero-at-zero output.
    pub output_act: Activation,
}

/// Plain multilayer perceptron specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub act: Activation,
    pub output_dim: usize,
    pub output_bias: bool,
}

/// Architectures of the five subnetworks of a potential model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Joint energy, inputs `[Ī1, Ī2, J̄, −J̄, s̄]`.
    pub ficnn_fs: FicnnSpec,
    /// Mechanical feature vector, inputs `[Ī1, Ī2, J̄, −J̄]`.
    pub ficnn_f: FicnnSpec,
    /// Entropy feature vector, input `[s̄]`.
    pub ficnn_s: FicnnSpec,
    /// Dissipation potential, convex inputs `[Ī4, Ī5, Ī6]`, parameters `[J̄, s̄]`.
    pub picnn_g: PicnnSpec,
    /// Auxiliary entropy network, inputs `[Ī1, Ī2, J̄, T̄]`.
    pub mlp_s: MlpSpec,
}

impl Default for NetworkSpec {
    /// Published default architectures.
    fn default() -> Self {
        use Activation::*;
        NetworkSpec {
            ficnn_fs: FicnnSpec {
                input_dim: 5,
                hidden: vec![12, 12],
                hidden_act: vec![Exp, Exp],
                output_dim: 1,
                output_act: Softplus,
                output_bias: true,
            },
            ficnn_f: FicnnSpec {
                input_dim: 4,
                hidden: vec![12, 12, 12],
                hidden_act: vec![Exp, Softplus, Softplus],
                output_dim: 12,
                output_act: Identity,
                output_bias: true,
            },
            ficnn_s: FicnnSpec {
                input_dim: 1,
                hidden: vec![12, 12, 12],
                hidden_act: vec![Exp, Exp, Exp],
                output_dim: 12,
                output_act: Identity,
                output_bias: true,
            },
            picnn_g: PicnnSpec {
                conv_input_dim: 3,
                conv_hidden: vec![12, 12, 12],
                conv_act: vec![Softplus, Softplus, Softplus],
                param_input_dim: 2,
                param_hidden: vec![6, 6, 6],
                param_act: Gelu,
                output_act: Relu,
            },
            mlp_s: MlpSpec {
                input_dim: 4,
                hidden: vec![12, 12],
                act: Gelu,
                output_dim: 1,
                output_bias: true,
            },
        }
    }
}

impl FicnnSpec {
    pub fn validate(&self) -> crate::Result<()> {
        if self.hidden.len() != self.hidden_act.len() {
            return Err(crate::Error::Config(format!(
                "FICNN: {} hidden layers but {} activations",
                self.hidden.len(),
                self.hidden_act.len()
            )));
        }
        if self.hidden.is_empty() || self.input_dim == 0 || self.output_dim == 0 {
            return Err(crate::Error::Config("FICNN: empty dimension".into()));
        }
        Ok(())
    }
}

impl PicnnSpec {
    pub fn validate(&self) -> crate::Result<()> {
        if self.conv_hidden.len() != self.conv_act.len() {
            return Err(crate::Error::Config(format!(
                "PICNN: {} conv layers but {} activations",
                self.conv_hidden.len(),
                self.conv_act.len()
            )));
        }
        if self.conv_hidden.len() != self.param_hidden.len() {
            return Err(crate::Error::Config(
                "PICNN: coupling branch depth must match convex trunk depth".into(),
            ));
        }
        Ok(())
    }
}

impl NetworkSpec {
    pub fn validate(&self) -> crate::Result<()> {
        self.ficnn_fs.validate()?;
        self.ficnn_f.validate()?;
        self.ficnn_s.validate()?;
        self.picnn_g.validate()?;
        if self.ficnn_f.output_dim != self.ficnn_s.output_dim {
            return Err(crate::Error::Config(
                "feature widths of FICNN_F and FICNN_s must agree".into(),
            ));
        }
        Ok(())
    }

    /// Shared feature width `n` of the separable energy product term.
    pub fn feature_width(&self) -> usize {
        self.ficnn_f.output_dim
    }
}
