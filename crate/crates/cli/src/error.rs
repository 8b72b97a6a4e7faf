use grnkan::GrnError;
use thiserror::Error;

/// Failure of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or config file (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or inconsistent inputs and unwritable outputs (exit 2).
    #[error("{0}")]
    Data(String),
    /// Training or simulation broke down numerically (exit 3).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
        }
    }
}

impl From<&GrnError> for CliError {
    fn from(e: &GrnError) -> Self {
        match e {
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            GrnError::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<GrnError> for CliError {
    fn from(e: GrnError) -> Self {
        CliError::from(&e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
