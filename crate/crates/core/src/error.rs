use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("frame index {index} out of range for a frame of size {size}")]
    FrameIndex { index: usize, size: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root-find did not converge after {iterations} iterations; best bracket [{lower}, {upper}]")]
    RootFind { iterations: usize, lower: f64, upper: f64 },

    #[error(
        "tail mass {tail:e} outside radius {radius} exceeds {threshold:e}; try a radius of at least {suggested_radius}"
    )]
    TailCriterion {
        tail: f64,
        threshold: f64,
        radius: f64,
        suggested_radius: f64,
    },

    #[error("linear solver did not converge after {iterations} iterations (last relative residual {:e})", residual_history.last().copied().unwrap_or(f64::NAN))]
    SolverNonConvergence {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("eigensolver stagnated after {iterations} iterations")]
    EigenStagnation {
        iterations: usize,
        ritz_history: Vec<Vec<f64>>,
    },

    #[error("Lyapunov certificate refused: {reason}")]
    CertificateRefused { reason: String, witness: Option<Vec<f64>> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} needs {size} nodes, above the ceiling of {ceiling}")]
    Ceiling {
        what: &'static str,
        size: usize,
        ceiling: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = core::result::Result<T, Error>;
