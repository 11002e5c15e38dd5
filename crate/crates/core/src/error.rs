use thiserror::Error;

/// Errors surfaced by the library. `Usage` covers bad arguments and malformed
/// input; the other variants indicate an internal invariant was violated or a
/// computation was asked to exceed its guard rails.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("inconsistent state: {0}")]
    InconsistentState(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit code for the CLI: usage errors are 2, everything else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
