use thiserror::Error;

/// Errors raised by the library. Messages are stable; the CLI prints them verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite vector")]
    NonFinite,
    #[error("invalid domain: radius must be positive, got {0}")]
    InvalidDomain(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("no analytic population risk")]
    NoAnalyticPopulationRisk,
    #[error("beta must lie in (0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("eta must be positive, got {0}")]
    InvalidEta(f64),
    #[error("T must be ≥ 1")]
    InvalidIterations,
    #[error("unstable weights: sigma*eta = {0} must be below 2")]
    UnstableWeights(f64),
    #[error("bound undefined at t=0")]
    BoundUndefinedAtZero,
    #[error("non-neighboring datasets")]
    NonNeighboring,
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("x0 lies outside the feasible ball")]
    InfeasibleStart,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trajectory iterates were thinned; selection needs the full record")]
    ThinnedTrajectory,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
