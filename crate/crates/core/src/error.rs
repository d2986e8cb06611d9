use thiserror::Error;

/// Errors surfaced by every fallible operation in this crate.
///
/// The three variants deliberately mirror how callers should react:
/// fix the input, pick a supported structure, or shrink the problem.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The input violates a documented precondition (bad size, bad range,
    /// mismatched dimensions, an interval with `a >= b`, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The operation is well defined only for a structure the argument does
    /// not have, e.g. a group-valued operation applied to a translation grid.
    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    /// The request is valid but exceeds an enumeration or memory budget.
    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedOperation(msg.into())
    }

    pub fn limit(msg: impl Into<String>) -> Self {
        Error::ResourceLimit(msg.into())
    }
}
