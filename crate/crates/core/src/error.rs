use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("diagonal entry {index} is {value}, must be strictly positive")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {what} {index} (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("step {t} is a {found} step, expected a {expected} step")]
    WrongStepKind {
        t: usize,
        expected: &'static str,
        found: &'static str,
    },

    #[error("operation unsupported for {problem} problem: {what}")]
    Unsupported { problem: &'static str, what: &'static str },

    #[error("iterates diverged (non-finite value) at step {0}")]
    Diverged(usize),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
