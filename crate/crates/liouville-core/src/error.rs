//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Matrix dimensions are inconsistent with the requested operation.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A state failed a physicality check (hermiticity, trace, positivity).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A model description is internally inconsistent.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A LAPACK call or iterative procedure failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input parameters are outside the supported domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<ndarray_linalg::error::LinalgError> for CoreError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        CoreError::Numerical(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
