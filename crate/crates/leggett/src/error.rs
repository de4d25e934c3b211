use std::path::PathBuf;

use crate::commands::ExitStatus;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("failed to load {path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] leggett_core::Error),
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            Self::Core(leggett_core::Error::SolverFailure(_)) => ExitStatus::SolverFailure,
            _ => ExitStatus::ConfigError,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn load(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Load { path: path.into(), message: message.to_string() }
    }
}
