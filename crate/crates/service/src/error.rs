use thiserror::Error;

/// Errors surfaced by the session service, each mapped to an HTTP status.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// The request does not fit the session's current phase or card.
    #[error("conflict: {0}")]
    Conflict(String),

    /// The session is finished and accepts no more answers.
    #[error("gone: {0}")]
    Gone(String),

    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),

    #[error("corrupt event log: {0}")]
    CorruptLog(String),

    #[error(transparent)]
    Engine(#[from] teach_core::Error),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::InvalidArgument(_) => "invalid_argument",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Gone(_) => "gone",
            ServiceError::Storage(_) => "storage",
            ServiceError::CorruptLog(_) => "corrupt_log",
            ServiceError::Engine(teach_core::Error::InvalidArgument(_)) => "invalid_argument",
            ServiceError::Engine(_) => "engine",
        }
    }
}

pub type Result<T> = std::result::Result<T, ServiceError>;
