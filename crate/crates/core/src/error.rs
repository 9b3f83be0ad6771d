use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unparseable timestamp `{value}` on line {line}")]
    InvalidTimestamp { line: u64, value: String },

    #[error("invalid number `{value}` in column `{column}` on line {line}")]
    InvalidNumber {
        line: u64,
        column: String,
        value: String,
    },

    #[error("non-monotone timestamps at line {line}")]
    NonMonotoneTimestamps { line: u64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient length: need at least {needed} rows, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("no exogenous columns in frame")]
    NoExogenousColumns,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("constant input: {0}")]
    ConstantInput(&'static str),

    #[error("zero variance in actual values")]
    ZeroVariance,

    #[error("unknown feature `{name}`; valid names: {}", valid.join(", "))]
    UnknownFeature { name: String, valid: Vec<String> },

    #[error("unknown term: {0}")]
    UnknownTerm(String),

    #[error("tree references feature {0} outside the allowed set")]
    DisallowedFeature(usize),

    #[error("orderings cover different term sets")]
    MismatchedUniverse,

    #[error("persistence requires historical target lags")]
    PersistenceUndefined,

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("unsupported model format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u64, supported: u32 },

    #[error("model checksum mismatch")]
    ChecksumMismatch,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
