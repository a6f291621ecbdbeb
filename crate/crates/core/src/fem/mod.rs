//! Isoparametric 8-node hexahedral finite elements for the coupled
//! displacement–temperature problem: residual assembly (the physics-loss
//! backbone), backward-Euler time stepping, a forward Newton solver for data
//! generation and inference, and reaction extraction.

pub mod io;
pub mod mesh;
pub mod model;
pub mod problem;
pub mod residual;
pub mod shape;
pub mod solver;

pub use mesh::{box_grid, plate_with_hole, Mesh};
pub use model::{ConstitutiveModel, ConstitutiveWorker, EntropyMode, NeuralModel, QpOutputs};
pub use problem::{FemProblem, FieldHistory, InitialState, ResidualVector, StepSchedule};
pub use residual::Assembler;
pub use solver::{forward_solve, reactions, replay_reactions, Reaction, SolveOptions, SolveResult};
