use std::path::PathBuf;

use thiserror::Error;
use vmfkit::VmfError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] VmfError),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_validation() => 2,
            CliError::Model(VmfError::DegenerateData(_)) => 2,
            CliError::Model(_) => 3,
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Io { .. } => 4,
        }
    }
}
