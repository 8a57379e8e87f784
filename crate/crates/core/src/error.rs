use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cannot bundle an empty list")]
    EmptyBundle,
    #[error("duplicate dictionary label {0:?}")]
    DuplicateLabel(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("infeasible random graph: n={n}, m={m}")]
    InfeasibleGraph { n: usize, m: usize },
    #[error("state matrix is rank deficient: columns {0} and {1} coincide")]
    DegenerateStates(usize, usize),
    #[error("training did not converge after {epochs} epochs (relative update {last_update:e})")]
    NotConverged { epochs: usize, last_update: f64 },
    #[error("ring system rejected after {0} resamples: designated vectors not pseudo-orthogonal")]
    RingOrthogonality(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
