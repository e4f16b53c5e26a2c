use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-physical sonic sample: {0}")]
    Domain(String),

    #[error("indirect-label column is collinear with the intercept (variance {variance:e})")]
    Collinear { variance: f64 },

    #[error("need at least {min} samples, got {got}")]
    Length { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid scale: {0}")]
    Scale(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("well {0} has no valid samples")]
    EmptyWell(String),

    #[error("cannot split {wells} wells with train fraction {train_frac}")]
    InsufficientWells { wells: usize, train_frac: f64 },

    #[error("sequence length {seq_len} exceeds shortest well ({shortest} samples)")]
    Window { seq_len: usize, shortest: usize },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}", path.display())]
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

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
