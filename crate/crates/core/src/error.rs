use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no training data")]
    NoTrainingData,

    #[error("sequence too short: need at least {needed} maps, have {available}")]
    SequenceTooShort { needed: usize, available: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("divergence detected at step {step}: non-finite gradient in `{param}`")]
    Divergence { step: u64, param: String },

    #[error("format mismatch: {malformed} of {total} rows in {path} could not be parsed")]
    FormatMismatch {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },

    #[error("non-deterministic function: two evaluations at the same point differ ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("insufficient future ground truth: at most {max_feasible} rollout steps available")]
    InsufficientHorizon { max_feasible: usize },

    #[error("{0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, expected: &[usize], actual: &[usize]) -> Self {
        Error::Shape {
            op,
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}
