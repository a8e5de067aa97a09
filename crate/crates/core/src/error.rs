use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input is empty: {0}")]
    EmptyInput(String),

    #[error("page file name is not numeric: {0}")]
    NonNumericPage(String),

    #[error("text too short for fingerprinting: {words} words, need at least {needed}")]
    TooShort { words: usize, needed: usize },

    #[error("signature length mismatch: {left} vs {right}")]
    SignatureLength { left: usize, right: usize },

    #[error("xml error at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("document invariant violated: {0}")]
    Invariant(String),

    #[error("unknown character id {0}")]
    UnknownCharacter(u32),

    #[error("unknown book id {0:?}")]
    UnknownBook(String),

    #[error("annotation import misaligned at token {index}: expected {expected:?}, found {found:?}")]
    Alignment {
        index: usize,
        expected: String,
        found: String,
    },

    #[error("malformed import line {line}: {message}")]
    ImportFormat { line: usize, message: String },

    #[error("http error fetching {url}: {message}")]
    Http { url: String, message: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("missing prerequisite phase {missing:?} for {book}")]
    MissingPhase { book: String, missing: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// An I/O failure on `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
