use thiserror::Error;

/// Errors raised by estimation, sampling and ingestion routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// The method cannot be applied to this data (e.g. ratio exceedances
    /// over a nonpositive threshold).
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
}

pub type Result<T> = std::result::Result<T, TailError>;

pub(crate) fn invalid(msg: impl Into<String>) -> TailError {
    TailError::InvalidParameter(msg.into())
}

pub(crate) fn out_of_range(msg: impl Into<String>) -> TailError {
    TailError::OutOfRange(msg.into())
}
