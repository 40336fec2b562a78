use std::path::Path;

use thiserror::Error;

/// Exit status for bad arguments, unreadable or malformed input.
pub const EXIT_INVALID: i32 = 2;
/// Exit status when the request is well-formed but cannot be served
/// (PGD without a model, oracle beyond its size cap, ...).
pub const EXIT_CAPABILITY: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] eqsmooth_core::Error),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("writing output: {0}")]
    Output(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_capability() => EXIT_CAPABILITY,
            _ => EXIT_INVALID,
        }
    }
}
