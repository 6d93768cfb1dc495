use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("backtracking did not find an acceptable step after {doublings} doublings")]
    BacktrackingFailed { doublings: usize },

    #[error("KKT check failed: {0}")]
    KktViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from user-supplied configuration rather than
    /// from a numerical failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::DimensionMismatch { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
