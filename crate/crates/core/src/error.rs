use std::io;

use thiserror::Error;

use crate::data::libsvm::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:e} below tolerance)")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schedule evaluated at t = 0; steps are 1-based")]
    ZeroStep,

    #[error("{operation} requires optimizer kind {expected}, state is {found}")]
    KindMismatch {
        operation: &'static str,
        expected: &'static str,
        found: &'static str,
    },

    #[error("gradient at the averaged iterate is required but missing")]
    MissingAveragedGradient,

    #[error("block size mismatch: optimizer expects {expected}, block has {found}")]
    BlockSizeMismatch { expected: usize, found: usize },

    #[error("invalid label {0}: logistic regression expects 0 or 1")]
    InvalidLabel(f64),

    #[error("sample stream exhausted after {completed} of {requested} steps")]
    StreamExhausted { completed: u64, requested: u64 },

    #[error("eigenvalue bound violated at t = {t}: {detail}")]
    InvariantViolation { t: u64, detail: String },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
