use thiserror::Error;

/// Errors produced anywhere in the inference toolkit.
#[derive(Debug, Error)]
pub enum GrnError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training failed at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("simulation blew up for gene {gene} at step {step}")]
    Simulation { gene: String, step: usize },

    #[error("invalid network specification: {0}")]
    Spec(String),

    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GrnError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        GrnError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        GrnError::Config(msg.into())
    }

    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, GrnError::Training { .. } | GrnError::Simulation { .. })
    }
}

pub type Result<T> = std::result::Result<T, GrnError>;
