//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MrfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed or inconsistent file contents.
    #[error("format error: {0}")]
    Format(String),

    /// A cached artifact no longer matches the inputs it was derived from.
    #[error("cache invalid: {0}")]
    CacheInvalid(String),

    /// The requested density profile cannot meet the Nyquist criterion.
    #[error("infeasible trajectory: {0}")]
    InfeasibleTrajectory(String),

    /// A tissue segment contains no pixels above the segment threshold.
    #[error("empty segment for tissue '{0}'")]
    EmptySegment(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MrfError>;

impl MrfError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        MrfError::InvalidArgument(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        MrfError::Format(msg.into())
    }
}
