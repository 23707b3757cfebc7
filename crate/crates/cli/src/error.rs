use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit codes: 0 success, 1 config error, 2 non-convergence, 3 verification failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Refused(_) | Self::Io { .. } => EXIT_CONFIG,
            Self::Numerical(_) => EXIT_NOT_CONVERGED,
        }
    }
}

/// How a command that produced its outputs ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    NotConverged,
    VerifyFailed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => EXIT_OK,
            Self::NotConverged => EXIT_NOT_CONVERGED,
            Self::VerifyFailed => EXIT_VERIFY_FAILED,
        }
    }
}
