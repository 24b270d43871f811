//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid config key `{key}`")]
    InvalidConfigKey { key: String },

    #[error("invalid value for `{key}`: {message}")]
    InvalidConfigValue { key: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("item {item} has no {kind} feature vector")]
    MissingFeature { item: String, kind: &'static str },

    #[error("user {user} has interacted with every item; cannot sample a negative")]
    NoNegativeCandidate { user: String },

    #[error("no donor item with like/click ratio < 0.5 available for poisoning")]
    NoDonorItem,

    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error("unknown baseline `{0}`; not among the compared methods")]
    UnknownBaseline(String),

    #[error("unknown {what} `{value}` (expected one of {expected})")]
    UnknownName {
        what: &'static str,
        value: String,
        expected: &'static str,
    },

    #[error("checkpoint error in {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
