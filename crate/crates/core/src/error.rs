use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Record of a failed iterative solve: the iterate history lets callers see
/// whether the iteration stalled, oscillated or blew up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub solver: String,
    pub reason: String,
    pub iterations: usize,
    /// Per-iteration change (or residual) norms, oldest first.
    pub history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("evaluation domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
    #[error("expression parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("domain is not convex in the requested direction; line through {witness:?} meets it in {segments} segments")]
    NotConvex { witness: Vec<f64>, segments: usize },
    #[error("{} did not converge after {} iterations: {}", .0.solver, .0.iterations, .0.reason)]
    Divergence(DivergenceReport),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
