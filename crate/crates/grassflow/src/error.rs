//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by field construction, numerics and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("stability bound violated: {0}")]
    Stability(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("hierarchy table too shallow: need depth {needed}, have {have}")]
    Depth { needed: usize, have: usize },

    #[error("model/state mismatch: {0}")]
    ModelMismatch(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed: {invariant}")]
    Validation { invariant: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
