use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or index arguments that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Arguments outside the valid domain (negative variances, rank larger
    /// than a dimension, infeasible constraint combinations, ...).
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A numerical routine failed to make progress (singular system,
    /// non-positive-definite Gram matrix, no convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed text input (tensor files, experiment configs).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
