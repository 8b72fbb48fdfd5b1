use std::io;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Each variant maps onto one class of the command-line exit-code scheme,
/// see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Range(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite numeric input: {0}")]
    Numeric(String),

    #[error("{path}: malformed data at byte offset {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<String>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }

    /// Process exit code: 1 for I/O or format problems, 2 for shape or
    /// semantic problems, 3 for bad arguments.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } | Error::Parse { .. } => 1,
            Error::Shape(_) | Error::Range(_) | Error::Numeric(_) => 2,
            Error::Argument(_) => 3,
        }
    }
}
