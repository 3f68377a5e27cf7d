use std::path::PathBuf;

use curveflow_core::FlowError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("{path}:{line}: {message}")]
    CurveFile { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Flow {
        context: &'static str,
        #[source]
        source: FlowError,
    },
}

impl CliError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status for this error: 2 for bad input, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::CurveFile { .. } => EXIT_CONFIG,
            CliError::Flow { .. } => EXIT_FAILURE,
            CliError::Io { .. } => 1,
        }
    }
}

/// Maps a core parameter error onto the config key of the same name.
impl From<FlowError> for CliError {
    fn from(err: FlowError) -> Self {
        match err {
            FlowError::InvalidParameter { name, reason } => CliError::Validation { field: name.to_string(), reason },
            other => CliError::Flow { context: "computation failed", source: other },
        }
    }
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

pub type Result<T, E = CliError> = std::result::Result<T, E>;
