//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("dataset too small: need at least {need} pairs, got {got}")]
    DatasetTooSmall { need: usize, got: usize },

    #[error("split ratios must be positive and sum to 1 (got {0:?})")]
    BadSplitRatios([f64; 3]),

    #[error("empty token stream")]
    EmptyTokenStream,

    #[error("empty sequence cannot be embedded")]
    EmptySequence,

    #[error("zero-norm vector in cosine")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parsed log does not belong to template {template_id}: {reason}")]
    TemplateMismatch { template_id: usize, reason: String },

    #[error("index is stale: model checksum {params:#018x} != index checksum {index:#018x}")]
    StaleIndex { params: u64, index: u64 },

    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("batch contains a question with no positive candidate (question index {0})")]
    NoPositiveInBatch(usize),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("no log positions in packed input")]
    NoLogPositions,

    #[error("gold answer not found in training log (pair {pair}: {question:?})")]
    GoldSpanMissing { pair: usize, question: String },

    #[error("empty question set")]
    EmptyQuestionSet,

    #[error("empty gold answer")]
    EmptyGold,

    #[error("empty retrieval result")]
    EmptyRetrieval,

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("bad artifact {path}: {reason}")]
    BadArtifact { path: PathBuf, reason: String },

    #[error("missing artifact {path}: run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
