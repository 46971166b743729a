use thiserror::Error;

/// Errors raised by the simulator and the verification harness.
#[derive(Debug, Error)]
pub enum SrswError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("derivative order must be at least 1, got {0}")]
    InvalidOrder(u32),

    #[error("unsupported Sobolev index {0} (expected 0, 1 or 2)")]
    UnsupportedSobolevIndex(u32),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {term}")]
    NonFinite { term: String },

    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("stability rule violated: {0}")]
    Stability(String),

    #[error("{0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SrswError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SrswError {
    SrswError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
