use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // corpus
    #[error("line {0}: expected at least 3 tab-separated fields (id, label, text)")]
    MalformedLine(usize),
    #[error("line {0}: label must be one of positive, negative, neutral or '-'")]
    UnknownLabel(usize),
    #[error("line {line}: duplicate instance id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {0}: instance id is empty")]
    EmptyId(usize),
    #[error("dataset file is empty")]
    EmptyFile,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidSplit(f64),
    #[error("keyword lists must be non-empty and pairwise disjoint ({0})")]
    OverlappingVocab(String),

    // lexicons
    #[error("{file} line {line}: bad score")]
    BadScore { file: String, line: usize },
    #[error("{file} line {line}: malformed lexicon entry")]
    BadLexiconLine { file: String, line: usize },
    #[error("unknown labelling method {0:?} (expected afinn, vader or textblob)")]
    UnknownMethod(String),
    #[error("unknown label source {0:?} (expected gold, afinn, vader or textblob)")]
    UnknownSource(String),

    // encode
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("embedding line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },

    // nn
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called on {0} without a cached forward pass")]
    NoCachedForward(&'static str),
    #[error("optimizer step requested but no gradients were populated")]
    MissingGradients,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    // models
    #[error("{arch} expects {expected} dropout rates, got {found}")]
    BadDropoutScheduleLength {
        arch: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    // evalx
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("confusion matrix has no entries")]
    EmptyMatrix,
    #[error("instance {id:?} has no {source_name} label")]
    MissingLabels { source_name: String, id: String },
    #[error("experiment configuration violates its protocol: {0}")]
    ConfigViolation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::ShapeMismatch(_) | Error::NoCachedForward(_) | Error::MissingGradients
        )
    }
}
