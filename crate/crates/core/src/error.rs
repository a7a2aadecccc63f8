use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("window {start}..{end} has no samples")]
    EmptyWindow { start: usize, end: usize },

    #[error("window {start}..{end} exceeds dataset length {len}")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("normalizer fitted on {expected} series, dataset has {actual}")]
    SeriesCountMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("insufficient data: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid orders: {0}")]
    InvalidOrders(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid solver config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient history at sample {at}: need {needed} prior samples")]
    InsufficientHistory { at: usize, needed: usize },

    #[error("length mismatch: {actuals} actuals vs {predictions} predictions")]
    LengthMismatch { actuals: usize, predictions: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("grid violation for sensor {sensor} at {timestamp}")]
    GridViolation { sensor: String, timestamp: String },

    #[error("sensor {sensor} too sparse: {:.1}% missing", missing_fraction * 100.0)]
    TooSparse {
        sensor: String,
        missing_fraction: f64,
    },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
