use thiserror::Error;

/// Errors raised by instance validation, estimators and algorithm runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("optimal arm is not unique: arms {first} and {second} share the maximal mean")]
    AmbiguousOptimum { first: usize, second: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("infeasible instance: {0}")]
    InfeasibleInstance(String),

    #[error("arm {0} is tracked but has no reward this round")]
    MissingArm(usize),

    #[error("arm {0} appears more than once in a reward batch")]
    DuplicateArm(usize),

    #[error("arm {0} is not tracked")]
    UntrackedArm(usize),

    #[error("insufficient data: need at least {needed} rounds, have {have}")]
    InsufficientData { needed: u64, have: u64 },

    #[error("numerical integrity violated: variance {value:e} at scale {scale:e}")]
    NumericalIntegrity { value: f64, scale: f64 },

    #[error("weights leave the simplex: {0}")]
    BadWeights(String),

    #[error("confidence parameter {0} is out of range")]
    BadDelta(f64),

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("known per-arm variances are required by this algorithm")]
    MissingVariance,

    #[error("correlation {0} does not give a positive semidefinite covariance")]
    BadRho(f64),

    #[error("cluster count {0} must divide the number of arms")]
    BadClusterCount(usize),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
