use thiserror::Error;

/// Crate-wide error type.
///
/// `Config` covers anything detectable before episode 1 (bad parameters,
/// dimension mismatches, slot-ordering violations); `Runtime` covers failures
/// mid-run or while handling artifacts.
#[derive(Debug, Error)]
pub enum EceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl EceError {
    pub fn config(msg: impl Into<String>) -> Self {
        EceError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        EceError::Runtime(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, EceError>;
