use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {n} objects")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("triplet ({a}, {b}, {c}) has repeated objects")]
    DegenerateTriplet { a: usize, b: usize, c: usize },

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("eigensolver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid step policy parameter: {0}")]
    InvalidPolicyParam(String),

    #[error("batch objective diverged: {objective:e} exceeds {limit:e}")]
    Divergence { objective: f64, limit: f64 },

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("requested {requested} rows but only {available} available")]
    CountOverflow { requested: usize, available: usize },

    #[error("empty triplet set")]
    EmptySet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
