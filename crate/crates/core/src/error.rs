use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate simplex: |det| = {det:e} below tolerance {tol:e}")]
    DegenerateSimplex { det: f64, tol: f64 },

    #[error("malformed simplex: {0}")]
    MalformedSimplex(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("density evaluation requires sigma > 0")]
    UnsupportedNoiseless,

    #[error("noise bound undefined for K = {k} (denominator {denominator} is not positive)")]
    NoiseBoundUndefined { k: usize, denominator: i64 },

    #[error("confidence parameter delta = {0} must lie in (0, 1)")]
    InvalidConfidence(f64),

    #[error("need at least {needed} cover points, got {got}")]
    InsufficientCover { needed: usize, got: usize },

    #[error("candidate family is empty")]
    EmptyFamily,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported dimension K = {k} for {what}")]
    UnsupportedDimension { k: usize, what: &'static str },

    #[error("packing budget exhausted after {proposals} proposals; achieved {achieved} of {requested} members")]
    PackingBudgetExceeded {
        achieved: usize,
        requested: usize,
        proposals: usize,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
