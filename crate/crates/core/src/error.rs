use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("corrupt image data in {path}: {reason}")]
    CorruptData { path: PathBuf, reason: String },

    #[error("class index {value} at ({x}, {y}) is out of range (K = {classes})")]
    ClassOutOfRange {
        value: u32,
        x: usize,
        y: usize,
        classes: usize,
    },

    #[error("mask value {value} at ({x}, {y}) is neither 0 nor 255")]
    NonBinaryValue { value: u32, x: usize, y: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("window size must be odd and at least 3, got {0}")]
    EvenWindow(usize),

    #[error("stabilizer C must be positive when a σ product vanishes outside the flat guard (C = {0})")]
    NonPositiveC(f64),

    #[error("expected a {expected} map, got {actual}")]
    WrongMapKind {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("class count mismatch: {0} vs {1}")]
    ClassCountMismatch(usize, usize),

    #[error("accumulator storage modes differ")]
    StorageMismatch,

    #[error("unsupported weights schema {found:?}, expected {expected:?}")]
    SchemaVersionMismatch { found: String, expected: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no mask available for record {0:?}")]
    MissingMask(String),

    #[error("no ground-truth mask for record {0:?}")]
    MissingGtMask(String),

    #[error("empty input")]
    EmptyInput,

    #[error("failed to write {path}: {reason}")]
    Write { path: PathBuf, reason: String },

    #[error("record {id:?}: {source}")]
    Record {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attaches the manifest record id to an error.
    pub fn in_record(self, id: &str) -> Self {
        match self {
            e @ Error::Record { .. } => e,
            other => Error::Record {
                id: id.to_string(),
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::DimensionMismatch { expected, actual }
    }
}

/// Fails with [`Error::DimensionMismatch`] unless both shapes agree.
pub fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dims(expected, actual))
    }
}
