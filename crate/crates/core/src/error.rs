use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// More positions than items, so no feasible assignment exists.
    #[error("infeasible: k = {k} positions but only {n} items")]
    Infeasible { n: usize, k: usize },

    #[error("scales sum to {sum}, which exceeds 1")]
    Normalization { sum: f64 },

    /// A bucket needed by strict estimation has no records.
    #[error("insufficient samples: bucket {bucket} is empty")]
    InsufficientSamples { bucket: String },

    /// Exhaustive enumeration would exceed the configured limit.
    #[error("enumeration too large: {what} needs {size} evaluations (limit {limit})")]
    TooLarge { what: String, size: u128, limit: u128 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
