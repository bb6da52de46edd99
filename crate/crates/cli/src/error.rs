use thiserror::Error;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training error: {0}")]
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Training(_) => 4,
        }
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    /// Errors raised while fitting; invalid settings still count as config
    /// errors.
    pub fn training(e: mcgrad::Error) -> Self {
        match e {
            mcgrad::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Training(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
