use std::process::ExitCode;

use thiserror::Error;

/// Failures that stop a run before a verdict. Each maps to a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Output(_) => ExitCode::from(2),
            CliError::Capacity(_) => ExitCode::from(3),
        }
    }
}

impl From<rrl_core::Error> for CliError {
    fn from(e: rrl_core::Error) -> Self {
        if e.is_capacity() {
            CliError::Capacity(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}
