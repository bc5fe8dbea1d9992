use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RadfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RadfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("{0}")]
    Data(String),

    #[error("failed to parse {column:?} at row {row}: {value:?} is not a number")]
    Parse { row: usize, column: String, value: String },

    #[error("missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("malformed model at `{path}`: {message}")]
    Malformed { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RadfError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RadfError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RadfError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(RadfError::ShapeMismatch { what, expected, got })
    }
}
