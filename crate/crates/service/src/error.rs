use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    /// Bad flags, config values or request parameters.
    #[error("{0}")]
    Usage(String),

    #[error("{message}")]
    NotFound { message: String, hint: Option<String> },

    #[error("{0}")]
    Conflict(String),

    #[error("artifact store is locked: {0}")]
    Locked(String),

    #[error("{0}")]
    Runtime(String),
}

impl ServiceError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn not_found(msg: impl Into<String>) -> Self {
        Self::NotFound {
            message: msg.into(),
            hint: None,
        }
    }

    /// Process exit code: 2 for argument errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<hotspot_core::Error> for ServiceError {
    fn from(e: hotspot_core::Error) -> Self {
        match e {
            hotspot_core::Error::Argument(m) => Self::Usage(m),
            hotspot_core::Error::Schema(_) => Self::Usage(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(format!("json: {e}"))
    }
}
