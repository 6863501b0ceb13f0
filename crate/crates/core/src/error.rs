use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParam { name: &'static str, msg: String },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("entity `{0}` is already enrolled")]
    DuplicateEntity(String),

    #[error("reference database is empty")]
    EmptyDb,

    #[error("database format version `{found}` is not supported (expected `{expected}`)")]
    VersionMismatch { found: String, expected: String },

    #[error("corrupted database: {0}")]
    CorruptDb(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
