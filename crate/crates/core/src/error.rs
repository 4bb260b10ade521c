use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong between reading frames and writing metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("pixel value {value} outside 0..=255")]
    PixelOutOfRange { value: i64 },

    #[error("invalid rank {rank}: {reason}")]
    InvalidRank { rank: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("prior block is rank deficient (sigma_k / sigma_1 = {ratio:e})")]
    DegeneratePrior { ratio: f64 },

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("numerical failure in {stage} at iteration {iteration}")]
    NumericalFailure { stage: &'static str, iteration: usize },

    #[error("batch {index} failed: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed PGM {path}: {reason}")]
    Pgm { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dims(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}

pub(crate) fn mismatch(context: &'static str, expected: (usize, usize), found: (usize, usize)) -> Error {
    Error::DimensionMismatch {
        context,
        expected: dims(expected.0, expected.1),
        found: dims(found.0, found.1),
    }
}
