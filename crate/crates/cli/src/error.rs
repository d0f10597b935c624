use std::fmt;
use std::io::ErrorKind;

use depscreen::config::SettingsError;
use depscreen::corpus::CorpusError;
use depscreen::evalsuite::EvalError;
use depscreen::hosted::HostedError;
use depscreen::infer::InferError;
use depscreen::trainer::{BackendError, CheckpointError, LossCsvError, TrainError};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_REMOTE: u8 = 3;

/// An error plus the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn remote(message: impl Into<String>) -> Self {
        CliError { code: EXIT_REMOTE, message: message.into() }
    }

    pub fn other(message: impl Into<String>) -> Self {
        CliError { code: EXIT_OTHER, message: message.into() }
    }

    pub fn io(context: impl fmt::Display, e: std::io::Error) -> Self {
        let code = if e.kind() == ErrorKind::NotFound { EXIT_USAGE } else { EXIT_OTHER };
        CliError { code, message: format!("{context}: {e}") }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SettingsError> for CliError {
    fn from(e: SettingsError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Write { .. } => CliError::other(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::EmptySplit(_) | TrainError::Unsplit => CliError::usage(e.to_string()),
            _ => CliError::other(e.to_string()),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        let code = if e.source.kind() == ErrorKind::NotFound { EXIT_USAGE } else { EXIT_OTHER };
        CliError { code, message: e.to_string() }
    }
}

impl From<LossCsvError> for CliError {
    fn from(e: LossCsvError) -> Self {
        match e {
            LossCsvError::Write { .. } => CliError::other(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<HostedError> for CliError {
    fn from(e: HostedError) -> Self {
        if e.is_remote() {
            CliError::remote(e.to_string())
        } else {
            CliError::usage(e.to_string())
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::Io { path, source } => CliError::io(path.display(), source),
            other => CliError::usage(other.to_string()),
        }
    }
}
