use std::io;

use thiserror::Error;

pub type Result<T, E = PwError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PwError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("axis index {j} out of range for dimension {n} (axes are numbered 1..={n})")]
    AxisOutOfRange { j: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("matrix is singular: |det| = {det:e}")]
    SingularMatrix { det: f64 },

    /// The map has a nontrivial kernel; composition would leave the PW class.
    #[error("affine map is not injective: kernel has dimension {}", kernel.len())]
    NotInjective { kernel: Vec<Vec<f64>> },

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("every abscissa on the line is masked; no phase can be recovered")]
    DegenerateLine,

    #[error(
        "phase increment {increment:.3} rad between abscissas {index} and {} is too close to pi; use denser abscissas",
        index + 1
    )]
    Resolution { index: usize, increment: f64 },

    #[error("grid of {nodes} nodes exceeds the budget of {budget}")]
    ResourceExhausted { nodes: usize, budget: usize },

    #[error("bandwidth is undefined for a spectrum with zero total energy")]
    UndefinedBandwidth,

    #[error("malformed signal file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
