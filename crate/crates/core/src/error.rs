use thiserror::Error;

/// Errors produced by the sampling, coding, transform and attack routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bias {value} lies outside the support [-{max}, {max}]")]
    OutOfSupport { value: f64, max: f64 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("exhaustive enumeration over n = {n} inputs exceeds the budget of n <= {max}")]
    BudgetExceeded { n: usize, max: usize },

    #[error("padding {pad_len} on each side leaves no original columns out of {total}")]
    InfeasiblePadding { total: usize, pad_len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed input at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
