use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown scene preset `{0}`")]
    UnknownPreset(String),

    #[error("curve self-intersects or obstacles overlap: {0}")]
    SelfIntersection(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge for entry ({row}, {col})")]
    Quadrature { row: usize, col: usize },

    #[error("point ({x}, {y}) is within one element of the boundary")]
    NearBoundary { x: f64, y: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("matrix too large for dense SVD: n = {0}")]
    TooLarge(usize),

    #[error("configuration error in key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
