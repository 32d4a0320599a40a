use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation and inversion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad dimensions: {0}")]
    BadDimensions(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("zero signal: {0}")]
    ZeroSignal(String),

    #[error("both arguments of the error functional are identically zero")]
    BothZero,

    #[error("MVAR simulation diverged at sample {sample} (|z| = {magnitude:e})")]
    InstabilityDetected { sample: usize, magnitude: f64 },

    #[error("no model accepted after {attempts} attempts")]
    RejectionBudgetExceeded { attempts: usize },

    #[error("no source pair satisfies the placement constraints")]
    NoFeasiblePair,

    #[error("source index {index} out of range for {n} sources")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("segment length {segment} exceeds series length {len}")]
    SegmentTooLong { segment: usize, len: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("SVD failed: {0}")]
    SvdFailure(String),

    #[error("objective returned a non-finite value at lambda = {lambda:e}")]
    NonFiniteObjective { lambda: f64 },

    #[error("no records left after filtering ({excluded} excluded)")]
    EmptyAfterFiltering { excluded: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
