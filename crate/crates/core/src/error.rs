use thiserror::Error;

/// Errors raised anywhere in the planning, estimation and simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("bracket error: f({lo}) = {f_lo} and f({hi}) = {f_hi} do not change sign")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("no convergence after {iterations} iterations (bracket width {width})")]
    Convergence { iterations: usize, width: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("search limit: {0}")]
    SearchLimit(String),

    #[error("shape error: expected {expected} features, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("estimation error: cell (arm {arm}, leaf {leaf}) {reason}")]
    Estimation { arm: usize, leaf: usize, reason: String },

    #[error("learner error: {0}")]
    Learner(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
