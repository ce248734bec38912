//! Unsupervised ensemble regression.
//!
//! Given an `m × n` matrix of regressor predictions and only the mean and
//! variance of the response, [`upcr_fit`] estimates how well each regressor
//! correlates with the unseen response, flags problems where no regressor
//! carries usable signal, prunes weak regressors and builds a linear ensemble
//! from the leading principal component(s) of the prediction covariance.
//!
//! ```
//! use upcr::{generate, upcr_fit, PipelineConfig, Signal, SyntheticEnsembleSpec};
//!
//! let spec = SyntheticEnsembleSpec::new(6, 2000, Signal::Normal { g2: 0.8, mean: 0.0 }, 0.1, 7);
//! let data = generate(&spec).unwrap();
//! let fit = upcr_fit(&data.predictions, &data.truth.moments(), &PipelineConfig::default()).unwrap();
//! assert!(!fit.is_hard());
//! assert!((fit.g2_hat - 0.8).abs() < 0.1);
//! ```

pub mod baselines;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::{predict, upcr_fit};
pub use linalg::{EigenPairs, LeastSquares, Matrix, SymMatrix};
pub use model::{
    Difficulty, FittedEnsemble, G2Estimate, G2Source, HardCheck, Loss, PipelineConfig,
    PredictionMatrix, PruneRule, ResidualCurve, ResidualPoint, ResponseMoments, StageFit,
};
pub use synth::{generate, GroundTruth, Signal, SyntheticData, SyntheticEnsembleSpec};
