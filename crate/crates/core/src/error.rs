use thiserror::Error;

#[derive(Debug, Error)]
pub enum NspError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite log-weight while resampling point {index}")]
    NonFinite { index: usize },

    #[error("{what} of size {n} exceeds the limit of {max}")]
    TooLarge { what: &'static str, n: usize, max: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NspError>;
