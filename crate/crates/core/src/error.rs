//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability vector must be non-empty")]
    EmptyProbVector,

    #[error("probability out of range at index {index}: {value}")]
    ProbOutOfRange { index: usize, value: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("count k={k} out of range for n={n}")]
    CountOutOfRange { k: usize, n: usize },

    #[error("subset size must satisfy 0 < k < n, got k={k}, n={n}")]
    InvalidSubsetSize { k: usize, n: usize },

    #[error("theta[{index}] = {value} is on the boundary; gradients need theta in (0, 1)")]
    BoundaryTheta { index: usize, value: f64 },

    #[error("degenerate distribution: P(sum = {k}) = {prob:e} is below the 1e-12 floor")]
    DegenerateDistribution { k: usize, prob: f64 },

    #[error("mask has {got} ones, expected {expected}")]
    InvalidSupport { got: usize, expected: usize },

    #[error("mask entries must be 0 or 1, found {value} at index {index}")]
    InvalidMaskEntry { index: usize, value: u8 },

    #[error("length {got} does not match expected length {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("support too large: C({n}, {k}) = {size} exceeds the enumeration guard of 10^6")]
    SupportTooLarge { n: usize, k: usize, size: u128 },

    #[error("estimator needs at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },

    #[error("objective evaluation failed on mask {mask:?}")]
    Objective {
        mask: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("objective error: {0}")]
    ObjectiveEval(String),

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("total_steps must be positive")]
    ZeroTotalSteps,

    #[error("step {step} exceeds total_steps {total}")]
    StepBeyondTotal { step: usize, total: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("IDX parse error at byte {offset}: {message}")]
    IdxParse { offset: u64, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite {what} at step {step}; run aborted")]
    NanAbort { step: u64, what: String },

    #[error("batch must be non-empty")]
    EmptyBatch,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
