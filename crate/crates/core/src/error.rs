use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the lab's numerical routines and file loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid Lamé parameters (lambda = {lambda}, mu = {mu}, n = {n})")]
    InvalidLame { lambda: f64, mu: f64, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("point {0:?} is not covered by the sampled grid")]
    Uncovered(Vec<f64>),

    #[error("field evaluation failed at {0:?}")]
    Evaluation(Vec<f64>),

    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("alternating minimization hit the round cap ({rounds}) before stabilizing")]
    RoundCap { rounds: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
