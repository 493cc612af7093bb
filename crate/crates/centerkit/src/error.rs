use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the command-line front end, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unresolvable references: {}", .0.join(", "))]
    Reference(Vec<String>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] centerkit_core::Error),
    #[error("self-test failed: {0} check(s) did not pass")]
    SelftestFailed(usize),
}

impl CliError {
    /// Process exit code: 2 parse, 3 I/O, 4 format, 5 reference.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Format { .. } => 4,
            CliError::Reference(_) => 5,
            CliError::SelftestFailed(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
