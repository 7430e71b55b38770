//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("zero-norm row at token position {position}")]
    ZeroNormRow { position: usize },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("infinite divergence: reference probability is zero at index {index}")]
    InfiniteDivergence { index: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("no tokens left after tokenization")]
    EmptyTokenization,

    #[error("all document tokens were filtered out")]
    AllTokensFiltered,

    #[error("missing pooled vector (encoding was not pooled)")]
    MissingPooled,

    #[error("duplicate doc id: {0}")]
    DuplicateDocId(String),

    #[error("batch size {0} is too small for in-batch mode (need at least 2)")]
    BatchTooSmall(usize),

    #[error("positive passage missing from candidate pool for query {query}")]
    PositiveMissing { query: usize },

    #[error("training diverged: loss is not finite at step {step}")]
    Diverged { step: usize },

    #[error("no eligible negative candidate")]
    NoEligibleNegative,

    #[error("empty ranked list for query {0}")]
    EmptyRankedList(String),

    #[error("query {0} present in one run but missing from the other")]
    RunMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vocabulary too small: {topics} topics need at least {needed} tokens, have {have}")]
    VocabTooSmall {
        topics: usize,
        needed: usize,
        have: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the arithmetic itself (as opposed to bad data
    /// or usage). The CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroNorm
                | Error::ZeroNormRow { .. }
                | Error::NonPositiveTemperature(_)
                | Error::NotADistribution(_)
                | Error::InfiniteDivergence { .. }
                | Error::Diverged { .. }
        )
    }
}
