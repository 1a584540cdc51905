use std::io;

use thiserror::Error;

/// Errors surfaced by the estimation and inversion routines.
#[derive(Debug, Error)]
pub enum MraError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vanishing DFT coefficient at frequency {frequency}")]
    VanishingDft { frequency: usize },

    #[error("no measurements to average")]
    NoMeasurements,

    #[error("reference signal has zero norm")]
    ZeroNorm,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("zero weight at ({k1}, {k2})")]
    ZeroWeight { k1: usize, k2: usize },

    #[error("lattice basis columns are linearly dependent")]
    DependentBasis,

    #[error("observation batch carries no true shifts")]
    MissingShifts,

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, MraError>;
