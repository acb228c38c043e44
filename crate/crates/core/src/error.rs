use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or extents that must agree do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Non-finite data or a decomposition that failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An input violates a documented precondition (Hermiticity, unitarity,
    /// normalization, gauge position).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
