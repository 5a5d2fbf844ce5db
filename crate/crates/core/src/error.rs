use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("potential has a negative value {value} at node {index}")]
    NonPositivePotential { index: usize, value: f64 },

    #[error("boundary datum must be strictly positive, got minimum {0}")]
    NonPositiveBoundary(f64),

    #[error("linear system is singular or not positive definite (pivot {pivot} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("iterative solver did not reach tolerance {tol:e} after {iters} iterations (residual {residual:e})")]
    SolverStalled { iters: usize, tol: f64, residual: f64 },

    #[error("point {0:?} lies outside the closed domain")]
    OutOfDomain(Vec<f64>),

    #[error("inverse link undefined for value {value} (must exceed K_min = {k_min})")]
    InverseDomain { value: f64, k_min: f64 },

    #[error("sample size N = {0} too small (log N must exceed 1)")]
    DegenerateN(usize),

    #[error("non-finite iterate at step {step}")]
    NonFiniteIterate { step: usize },

    #[error("ergodic window is empty")]
    EmptyWindow,

    #[error("empty sample")]
    EmptySample,

    #[error("fitted u_init has minimum {min} below floor {floor}")]
    NonPositiveU { min: f64, floor: f64 },

    #[error("integration box too small: boundary mass fraction {0:e}")]
    BoxTooSmall(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
