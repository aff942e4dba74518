use thiserror::Error;

/// Errors raised by constructors and numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("distribution must have at least one entry")]
    EmptyDistribution,

    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entry {index} is not finite")]
    NonFiniteEntry { index: usize },

    #[error("entries sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("p0 has {left} symbols but p1 has {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("weight {weight} outside the admissible range [{lo}, {hi}]")]
    WeightOutOfRange { weight: f64, lo: f64, hi: f64 },

    #[error("theta must lie in [0, 1], got {0}")]
    ThetaOutOfRange(f64),

    #[error("theta must lie strictly inside (0, 1), got {0}")]
    ThetaNotInterior(f64),

    #[error("parameter {name} out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("alphabet of size {size} exceeds the exhaustive limit of {max}")]
    AlphabetTooLarge { size: usize, max: usize },

    #[error("alphabet of size {size} is below the required minimum of {min}")]
    AlphabetTooSmall { size: usize, min: usize },

    #[error("breakpoints must satisfy 1 <= r1 < r2 < r3 <= {size}, got ({r1}, {r2}, {r3})")]
    InvalidBreakpoints {
        r1: usize,
        r2: usize,
        r3: usize,
        size: usize,
    },

    #[error("block {block} of the family weights sums to {sum}, expected 1")]
    BlockNotNormalized { block: usize, sum: f64 },

    #[error("theta {theta} sits on the boundary where symbol {symbol} has zero mass but carries information")]
    ThetaOnBoundary { theta: f64, symbol: usize },

    #[error("Renyi order parameter s must exceed -1, got {0}")]
    SOutOfRange(f64),

    #[error("invalid search bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("objective is not finite at s = {0}")]
    NonFiniteObjective(f64),

    #[error("observed symbol {symbol} has zero probability for every theta")]
    DegenerateLikelihood { symbol: usize },

    #[error("fisher information must be positive, got {0}")]
    NonPositiveFisher(f64),

    #[error("dataset has {counts} symbols but the mechanism has {alphabet}")]
    CountMismatch { counts: usize, alphabet: usize },

    #[error("dataset: {0}")]
    Dataset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
