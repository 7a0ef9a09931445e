use thiserror::Error;

pub type Result<T> = std::result::Result<T, MecError>;

#[derive(Debug, Error)]
pub enum MecError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined delay: {0}")]
    UndefinedDelay(String),

    #[error("empty history")]
    EmptyHistory,

    #[error("no completed tasks")]
    EmptyMetric,

    #[error("step called after the episode finished")]
    StepAfterDone,

    #[error("unknown agent {0}")]
    UnknownAgent(usize),

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("infeasible action: {0}")]
    Infeasible(String),

    #[error("non-finite {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MecError {
    pub(crate) fn validation(key: &str, reason: impl Into<String>) -> Self {
        MecError::Validation {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
