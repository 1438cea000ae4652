//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for all subsystems.
#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors (or a tensor and a label set) do not fit together.
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A configuration value or function argument is out of its allowed range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation that requires data was handed none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A JSON-lines record could not be parsed at all.
    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },

    /// A JSON-lines record parsed but violates the record schema.
    #[error("line {line}: schema error: {msg}")]
    Schema { line: usize, msg: String },

    /// A gradient block contains NaN or infinity; the update is aborted.
    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: &'static str },

    /// Checkpoint bytes do not match the expected layout.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The completion endpoint could not be reached after all retries.
    #[error("endpoint error after {attempts} attempt(s): {msg}")]
    Endpoint { attempts: u32, msg: String },

    /// The completion endpoint answered, but not with a usable response.
    #[error("endpoint protocol error (status {status}): {detail}")]
    Protocol { status: u16, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
