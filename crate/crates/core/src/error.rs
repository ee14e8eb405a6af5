//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample index {index} out of range for dataset of {n} instances")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("batch for worker {worker} has {got} indices, expected {expected}")]
    BatchSizeMismatch {
        worker: usize,
        expected: usize,
        got: usize,
    },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(
        "enumeration budget exceeded: ~{required} atomic outcomes needed, budget {budget}; \
         use the empirical estimator instead"
    )]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("non-finite {what} at epoch {epoch}, iteration {iter}, worker {worker}")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        iter: usize,
        worker: usize,
    },

    #[error(
        "gradient norm {achieved:.3e} still above tolerance {tolerance:.3e} \
         after {iterations} iterations"
    )]
    ToleranceNotReached {
        achieved: f64,
        tolerance: f64,
        iterations: usize,
    },

    #[error("no certified optimum exists for the {family} family")]
    NoCertifiedOptimum { family: &'static str },

    #[error("inconsistent history: {0}")]
    InconsistentHistory(String),

    #[error("not enough usable points: have {have}, need {need}")]
    InsufficientPoints { have: usize, need: usize },

    #[error("missing parameter {name} for rate prediction")]
    MissingParameter { name: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
