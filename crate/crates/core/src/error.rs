use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("k = {k} exceeds the {available} available points")]
    KTooLarge { k: usize, available: usize },

    #[error("point set is empty")]
    EmptySet,

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("NSD parameters must be positive integers, got ({k1}, {k2})")]
    NsdParamNonPositive { k1: u64, k2: u64 },

    #[error("k1 + k2 = {sum} exceeds the exact-evaluation bound {bound}")]
    OverflowGuard { sum: u64, bound: u64 },

    #[error("window lacks class {0}")]
    ClassMissing(u8),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
