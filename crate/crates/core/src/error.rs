//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation
    /// (ln/sqrt of a non-positive value, det F ≤ 0, T ≤ 0, ...).
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A computation produced a NaN or infinity where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Mismatched layer widths or malformed network specification.
    #[error("configuration error: {0}")]
    Config(String),

    /// Model state violates an invariant (e.g. ∂ê/∂s ≤ 0 at the reference state).
    #[error("model invalid: {0}")]
    ModelInvalid(String),

    /// Local or global iteration failed to converge.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Mesh or boundary-schedule inconsistency.
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }
}
