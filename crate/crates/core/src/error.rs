use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::WordId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Stream(#[from] io::Error),

    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },

    #[error("{file}:{line}: {msg}")]
    Format {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("embedding file covers no vocabulary word")]
    NoCoverage,

    #[error("pmi undefined for pair ({0}, {1}): the words never co-occur")]
    UndefinedPair(WordId, WordId),

    #[error("unknown word `{0}`")]
    UnknownWord(String),

    #[error("unknown pair ({0}, {1})")]
    UnknownPair(String, String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(
        "training diverged at epoch {epoch}: loss {loss:.6e} exceeds 1e3 x initial loss {initial:.6e}; \
         lower the learning rate"
    )]
    Diverged {
        epoch: usize,
        loss: f64,
        initial: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checksum mismatch for {0}")]
    Checksum(String),

    #[error("missing {0}")]
    Missing(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 for data errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) | Error::Diverged { .. } => 3,
            Error::Config(_) => 1,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
