use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed structured text; `location` is `line:column` or a field path.
    #[error("syntax error at {location}: {message}")]
    Syntax { location: String, message: String },

    /// Well-formed text describing an invalid robot (`field` is a field path).
    #[error("invalid robot description at {field}: {message}")]
    Semantic { field: String, message: String },

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("misaligned stamps: {0}")]
    MisalignedStamps(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Semantic { field: field.into(), message: message.into() }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter { name, message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        Error::Syntax { location: format!("line {} column {}", err.line(), err.column()), message: err.to_string() }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
