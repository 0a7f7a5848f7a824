use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("tensor shape {shape:?} needs {expected} elements, got {actual}")]
    TensorSize {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: index {index} out of range for length {len}")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("backward target must hold exactly one element, found shape {0:?}")]
    NonScalarTarget(Vec<usize>),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("token id {token} outside vocabulary of size {vocab}")]
    UnknownToken { token: usize, vocab: usize },
    #[error("token sequence must start with START")]
    MissingStart,
    #[error("caption {0} does not end with END")]
    MissingEnd(u64),
    #[error("image has {actual} features, model expects {expected}")]
    ImageDim { expected: usize, actual: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}:{line}: {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate vector (norm {0:e} below 1e-12)")]
    DegenerateVector(f64),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("no captions of length {0}")]
    NoCaptionsOfLength(usize),
    #[error("no foil image available: {0}")]
    NoFoil(String),
    #[error("non-finite loss at epoch {epoch}, example {example}")]
    NonFiniteLoss { epoch: usize, example: u64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
