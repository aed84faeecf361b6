use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the transform, model, training, data and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported wavelet `{0}` (expected one of haar, db2, sym4, coif1)")]
    UnsupportedWavelet(String),
    #[error("filter bank `{name}` failed validation: {reason}")]
    InvalidFilter { name: String, reason: String },
    #[error("series length {0} is odd; single-level transforms need an even length")]
    OddLength(usize),
    #[error("series length {len} is shorter than the filter length {filter_len}")]
    TooShort { len: usize, filter_len: usize },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("kernel size {kernel} exceeds band length {half_len}")]
    KernelTooLarge { kernel: usize, half_len: usize },
    #[error("degenerate affine: gamma of channel {0} is zero")]
    DegenerateAffine(usize),
    #[error("forward cache is stale (cached at parameter version {cached}, model is at {current})")]
    StaleCache { cached: u64, current: u64 },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGrad(String),
    #[error("non-finite parameter `{0}` after optimizer step")]
    NonFiniteParam(String),
    #[error("schedule step {step} out of range for {total} total steps")]
    StepOutOfRange { step: usize, total: usize },
    #[error("split `{0}` is empty")]
    EmptySplit(&'static str),
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },
    #[error("ingestion failed for {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },
    #[error("series of length {len} too short for split scheme `{scheme}` (needs {needed})")]
    InsufficientLength { scheme: String, len: usize, needed: usize },
    #[error("range of length {len} too short for lookback {lookback} + horizon {horizon}")]
    RangeTooShort { len: usize, lookback: usize, horizon: usize },
    #[error("zero-norm input to cosine similarity")]
    ZeroNorm,
    #[error("singular regression: {0}")]
    SingularFit(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
