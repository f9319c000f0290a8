//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building models, solving, or doing I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A transition row does not sum to one (or has a negative entry).
    #[error("transition row (a={action}, s={state}) is not a distribution: sum = {sum}")]
    NonStochasticRow {
        action: usize,
        state: usize,
        sum: f64,
    },

    /// Rewards must be nonnegative; the quadratic objective shares its saddle
    /// point with the standard one only under r >= 0.
    #[error("reward r[{state}][{action}] = {value} is negative")]
    NegativeReward {
        state: usize,
        action: usize,
        value: f64,
    },

    #[error("discount factor {0} outside (0, 1)")]
    DiscountOutOfRange(f64),

    #[error("support size {support} exceeds state count {num_states} (or is zero)")]
    SupportTooLarge { support: usize, num_states: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Policy entries must stay far enough from zero that log(pi) is finite.
    #[error("policy entry pi[{state}][{action}] = {value} is too small or negative")]
    NonPositivePolicyEntry {
        state: usize,
        action: usize,
        value: f64,
    },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("temperature tau = {0} must be positive")]
    NonPositiveTau(f64),

    #[error("iteration limit {max_iter} reached (residual {residual:e})")]
    MaxIterExceeded { max_iter: usize, residual: f64 },

    /// A quantity that must be strictly positive (e.g. the weight w used to
    /// build the quadratic-form dual) was not.
    #[error("value {value} at index {index} must be strictly positive")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("dual entry u[{state}][{action}] = {value} is not strictly positive")]
    NonPositiveDual {
        state: usize,
        action: usize,
        value: f64,
    },

    #[error("interpolation weight c = {0} outside [0, 1)")]
    COutOfRange(f64),

    /// An iterate left the representable range (typically exp overflow from a
    /// step size that is too large).
    #[error("non-finite iterate at iteration {iteration}")]
    NonFiniteState { iteration: usize },

    /// The reference iterate in a relative-change metric has zero norm.
    #[error("reference iterate has zero norm; relative change is undefined")]
    ZeroNormReference,

    #[error("sample buffer is empty")]
    EmptyBuffer,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
