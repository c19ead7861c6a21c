use std::path::PathBuf;

use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{message}")]
    Data { code: String, message: String },
    #[error("missing stage output {}", .0.display())]
    MissingStage(PathBuf),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::MissingStage(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn code(&self) -> &str {
        match self {
            CliError::Config(_) => "CONFIG",
            CliError::Data { code, .. } => code,
            CliError::MissingStage(_) => "MISSING_STAGE_OUTPUT",
            CliError::Io(_) => "IO",
        }
    }

    pub fn data(code: &str, message: impl Into<String>) -> Self {
        CliError::Data { code: code.to_string(), message: message.into() }
    }
}

impl From<gpdi_core::Error> for CliError {
    fn from(e: gpdi_core::Error) -> Self {
        CliError::Data { code: e.code().to_string(), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
