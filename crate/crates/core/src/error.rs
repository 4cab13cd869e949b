use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("cluster count mismatch: {left} vs {right}")]
    ClusterCountMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected d={expected}, got d={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} outside 1..={k}")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("mapping is not a permutation of 1..={0}")]
    NotAPermutation(usize),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("degenerate centers: minimum pairwise distance {0:e}")]
    DegenerateCenters(f64),

    #[error("weight of arm {index} is {value}; {requirement}")]
    InvalidWeight {
        index: usize,
        value: f64,
        requirement: &'static str,
    },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("exhaustive enumeration refused: M={m} exceeds {max}")]
    TooManyArms { m: usize, max: usize },

    #[error("minimax solver stopped with relative gap {gap:e} after {iterations} Newton steps")]
    NotConverged { gap: f64, iterations: usize },

    #[error("{path}: {message}")]
    Dataset { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stopping statistic requested before any cluster estimate exists")]
    MissingEstimate,

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
