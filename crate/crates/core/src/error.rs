use thiserror::Error;

/// Errors raised by the estimator, baselines and synthetic generator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row {row} is not centered (mean {mean:e})")]
    NotCentered { row: usize, mean: f64 },

    #[error("non-finite value at regressor {row}, sample {col}")]
    NonFinite { row: usize, col: usize },

    #[error(
        "at least {required} regressors are needed to identify the additive offsets, got {got}"
    )]
    TooFewRegressors { required: usize, got: usize },

    #[error("at least {required} samples are needed, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },

    #[error("invalid response moments: {0}")]
    InvalidMoments(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic specification: {0}")]
    InvalidSpec(String),

    #[error("degenerate covariance: leading eigenvalue {lambda1:e} against trace {trace:e}")]
    DegenerateCovariance { lambda1: f64, trace: f64 },

    #[error("matrix is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("regressor `{0}` is missing from the prediction matrix")]
    MissingRegressor(String),

    #[error("the fitted ensemble has a Hard verdict and carries no weights")]
    HardModel,

    #[error("no regressor survived pruning")]
    NoSurvivors,
}

pub type Result<T> = std::result::Result<T, Error>;
