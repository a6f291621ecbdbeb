//! Discovery of thermodynamically admissible constitutive models for coupled
//! thermomechanics.
//!
//! The library trains convexity-constrained neural potentials — an internal
//! energy `e(F, s)` and a dissipation potential `φ(g; F, s)` — against
//! discrete finite-element residuals or material-point stress data, and runs
//! forward simulations with both learned and analytic reference models.
//!
//! Layout:
//!
//! - [`diff`] — tape-based differentiation engine (reverse accumulation with
//!   differentiable adjoint graphs, so nested derivatives stay exact).
//! - [`kinematics`] — fixed-size 3×3 tensor algebra, deformation and thermal
//!   invariants.
//! - [`net`] — zero-anchored fully/partially input-convex networks, the
//!   auxiliary entropy MLP, parameter constraints and checkpoints.
//! - [`constitutive`] — assembly of the neural potentials, state laws
//!   (stress, temperature, heat flux) and the Newton entropy inversion.
//! - [`refmodels`] — analytic Helmholtz-based reference models used for data
//!   generation and solver verification.
//! - [`fem`] — isoparametric 8-node hexahedral elements for the coupled
//!   displacement–temperature problem.
//! - [`training`] — loss evaluation, Adam with constraint projection,
//!   activity reporting and the training loops.
//!
//! The numeric core is generic over the scalar type via `num-traits`; the
//! concrete `f64` instantiations used by the FEM, training and CLI layers are
//! exported as type aliases at the crate root. All shipped tolerances assume
//! IEEE-754 double precision.

pub mod constitutive;
pub mod diff;
pub mod error;
pub mod fem;
pub mod kinematics;
pub mod net;
pub mod refmodels;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the FEM, training and CLI layers.
pub type Real = f64;

pub type Tensor2 = kinematics::Tensor2<Real>;
pub type Vec3 = kinematics::Vec3<Real>;
pub type InvariantSet = kinematics::InvariantSet<Real>;
pub type DissipationInvariantSet = kinematics::DissipationInvariantSet<Real>;
pub type Tape = diff::Tape<Real>;
pub type Program = diff::Program<Real>;
pub type Workspace = diff::Workspace<Real>;
pub type PotentialModel = constitutive::PotentialModel<Real>;
pub type MaterialState = constitutive::MaterialState<Real>;
pub type ThermalModelParams = refmodels::ThermalModelParams<Real>;
pub type CoupledModelParams = refmodels::CoupledModelParams<Real>;
