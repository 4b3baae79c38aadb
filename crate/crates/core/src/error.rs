use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by how the command line reports them: validation
/// problems, numerical/runtime failures and I/O failures map to distinct
/// exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: &'static str, message: String },

    #[error("under-resolved {what}: {detail}")]
    UnderResolved { what: &'static str, detail: String },

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("admissibility: {0}")]
    Admissibility(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            field,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 runtime/numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } => 2,
            Error::Io { .. } | Error::Parse { .. } => 4,
            _ => 3,
        }
    }
}
