use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, Error)]
pub enum CoordError {
    /// Shapes or alphabets of two objects do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A constructor rejected its input (negative mass, bad normalization,
    /// non-metric matrix, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An enumeration or tree-size guard was exceeded.
    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    /// A numeric routine failed to reach its tolerance.
    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

pub type Result<T> = std::result::Result<T, CoordError>;

impl CoordError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        CoordError::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CoordError::InvalidInput(msg.into())
    }

    pub(crate) fn guard(msg: impl Into<String>) -> Self {
        CoordError::GuardExceeded(msg.into())
    }
}
