use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// Malformed input; `line` is 1-based when known.
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("truncated input: expected {expected} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: u64,
        expected: usize,
        available: usize,
    },

    #[error("invalid UTF-8 in word at byte offset {offset}")]
    InvalidUtf8 { offset: u64 },

    #[error("duplicate word: {0:?}")]
    DuplicateWord(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("word not found: {0:?}")]
    NotFound(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("nothing to analyze: {0}")]
    Empty(String),

    #[error("correlation undefined: similarity vector of {table:?} has zero variance")]
    UndefinedCorrelation { table: String },

    #[error("tags in {split} not seen in training data: {}", tags.join(", "))]
    UnseenTags { split: String, tags: Vec<String> },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }
}
