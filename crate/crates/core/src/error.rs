use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice size {0}: side length must be at least 3")]
    InvalidSize(usize),

    #[error("invalid initial pattern: {0}")]
    InvalidPattern(String),

    #[error("cell index {index} out of range for {cells} cells")]
    IndexOutOfRange { index: usize, cells: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid fraction {0}: resulting block width must lie in [1, L]")]
    InvalidFraction(f64),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("fit failed for {family}: {diagnostics}")]
    FitFailure {
        family: &'static str,
        diagnostics: String,
    },

    #[error("config file {0} does not exist")]
    MissingFile(PathBuf),

    #[error("duplicate key `{key}` on line {line}")]
    DuplicateKey { key: String, line: usize },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("type error for `{key}`: cannot parse {value:?} as {expected}")]
    TypeError {
        key: String,
        value: String,
        expected: &'static str,
    },

    #[error("range error for `{key}`: {value} not in {range}")]
    RangeError {
        key: String,
        value: String,
        range: &'static str,
    },

    #[error("malformed line {line}: {text:?}")]
    Malformed { line: usize, text: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
