use thiserror::Error;

/// Errors reported by the toriclab algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("code distance must be even and positive, got {0}")]
    InvalidDistance(usize),

    #[error("vertex index {index} out of range for {count} vertices")]
    InvalidVertex { index: usize, count: usize },

    #[error("error probability {0} outside the admissible range")]
    InvalidProbability(f64),

    #[error("syndrome has odd cardinality {0}")]
    OddSyndrome(usize),

    #[error("edge set has a non-empty boundary ({0} defects)")]
    NotACycle(usize),

    #[error("combinatorial guard exceeded: {count} items > limit {limit}")]
    GuardExceeded { count: u128, limit: u128 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("initial configuration does not cause a logical failure")]
    InitNotFailing,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no crossing found: {0}")]
    NoCrossing(String),

    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    #[error("no root found: {0}")]
    NoRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
