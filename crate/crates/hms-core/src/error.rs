use thiserror::Error;

/// Error type shared by every module; the CLI maps the variants onto exit codes.
#[derive(Debug, Error)]
pub enum HmsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HmsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HmsError::InvalidInput(msg.into()))
}

pub(crate) fn integrity<T>(msg: impl Into<String>) -> Result<T> {
    Err(HmsError::Integrity(msg.into()))
}
