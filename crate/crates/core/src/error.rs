use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid document at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot identify focus entity: {message} (candidates: {candidates:?})")]
    Identification {
        message: String,
        candidates: Vec<String>,
    },

    #[error("annotation provider {provider} ({version}) failed: {message}")]
    Annotation {
        provider: String,
        version: String,
        message: String,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("training error: {0}")]
    Training(String),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
