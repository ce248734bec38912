//! Data types shared by the estimator, the baselines and the generator.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{EigenPairs, Matrix};

/// Raw predictions: `values[i][j]` is regressor `i` evaluated on sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    regressor_names: Vec<String>,
    sample_ids: Vec<String>,
    values: Matrix,
}

impl PredictionMatrix {
    pub fn new(
        regressor_names: Vec<String>,
        sample_ids: Vec<String>,
        values: Matrix,
    ) -> Result<Self> {
        if values.nrows() != regressor_names.len() || values.ncols() != sample_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} regressor names and {} sample ids for a {}x{} value grid",
                regressor_names.len(),
                sample_ids.len(),
                values.nrows(),
                values.ncols()
            )));
        }
        if regressor_names.is_empty() {
            return Err(Error::TooFewRegressors {
                required: 1,
                got: 0,
            });
        }
        if sample_ids.is_empty() {
            return Err(Error::TooFewSamples {
                required: 1,
                got: 0,
            });
        }
        ensure_unique("regressor", &regressor_names)?;
        ensure_unique("sample", &sample_ids)?;
        for (i, row) in values.rows_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        Ok(Self {
            regressor_names,
            sample_ids,
            values,
        })
    }

    /// Convenience constructor naming regressors `f0, f1, …` and samples `0, 1, …`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let values = Matrix::from_rows(rows)?;
        let names = (0..values.nrows()).map(|i| format!("f{i}")).collect();
        let ids = (0..values.ncols()).map(|j| j.to_string()).collect();
        Self::new(names, ids, values)
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.regressor_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn num_regressors(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn regressor(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.regressor_names.iter().position(|n| n == name)
    }

    /// Keeps the listed regressors, in the listed order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let names = indices
            .iter()
            .map(|&i| self.regressor_names[i].clone())
            .collect();
        Self::new(
            names,
            self.sample_ids.clone(),
            self.values.select_rows(indices),
        )
    }
}

fn ensure_unique(kind: &'static str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName {
                kind,
                name: name.clone(),
            });
        }
    }
    Ok(())
}

/// The known mean and variance of the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseMoments {
    pub mean_y: f64,
    pub var_y: f64,
}

impl ResponseMoments {
    pub fn new(mean_y: f64, var_y: f64) -> Result<Self> {
        if !mean_y.is_finite() {
            return Err(Error::InvalidMoments(format!(
                "mean {mean_y} is not finite"
            )));
        }
        if !(var_y.is_finite() && var_y > 0.0) {
            return Err(Error::InvalidMoments(format!(
                "variance {var_y} must be positive and finite"
            )));
        }
        Ok(Self { mean_y, var_y })
    }
}

/// Mean-centered predictions `Z_ij = f_i(x_j) − b̂_i − μ_Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredData {
    pub z: Matrix,
    /// `b̂_i = mean_j f_i(x_j) − μ_Y`.
    pub bias_estimates: Vec<f64>,
    /// `μ̂_i = b̂_i + μ_Y`.
    pub regressor_means: Vec<f64>,
}

/// The one-parameter family of offset and covariance estimates indexed by
/// the assumed value `q` of `E[g(X)²]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoFamily {
    /// Offsets fitted at `q = 0`.
    pub a0: Vec<f64>,
    /// Upper end of the admissible `q` range.
    pub var_y: f64,
}

impl RhoFamily {
    pub fn dim(&self) -> usize {
        self.a0.len()
    }

    /// `ρ̂(q) = â(0) + (q/2)·𝟙`.
    pub fn rho(&self, q: f64) -> Vec<f64> {
        self.a0.iter().map(|a| a + 0.5 * q).collect()
    }

    /// `â(q) = â(0) − (q/2)·𝟙`.
    pub fn offsets(&self, q: f64) -> Vec<f64> {
        self.a0.iter().map(|a| a - 0.5 * q).collect()
    }
}

/// Loss applied to the off-diagonal residuals when fitting additive offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Squared,
    Absolute,
}

impl std::str::FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "squared" => Ok(Loss::Squared),
            "absolute" => Ok(Loss::Absolute),
            other => Err(format!(
                "unknown loss `{other}` (expected squared or absolute)"
            )),
        }
    }
}

/// Tuning constants of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub loss: Loss,
    /// Number of `q` values on the uniform grid over `[0, var_y]`.
    pub grid_points: usize,
    /// `ĝ₂ < eps_l · var_y` yields the Hard verdict.
    pub eps_l: f64,
    /// Regressors with `ρ̂_i < prune_abs_frac · var_y` are excluded.
    pub prune_abs_frac: f64,
    /// Regressors with `ρ̂_i < prune_rel_frac · ρ_max` are excluded.
    pub prune_rel_frac: f64,
    /// A second component is used when `λ₂ > two_pc_trace_frac · trace(Ĉ)`.
    pub two_pc_trace_frac: f64,
    /// Fewer survivors than this fall back to a plain average.
    pub min_ensemble_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            loss: Loss::Squared,
            grid_points: 201,
            eps_l: 0.1,
            prune_abs_frac: 0.05,
            prune_rel_frac: 1.0 / 3.0,
            two_pc_trace_frac: 0.1,
            min_ensemble_size: 5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid_points must be at least 2, got {}",
                self.grid_points
            )));
        }
        for (name, value) in [
            ("eps_l", self.eps_l),
            ("prune_abs_frac", self.prune_abs_frac),
            ("prune_rel_frac", self.prune_rel_frac),
            ("two_pc_trace_frac", self.two_pc_trace_frac),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1), got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// One sample of the projection residual curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub q: f64,
    pub res: f64,
    /// `ρ̂(q)` vanished, so `res` was set to 1.
    pub degenerate: bool,
}

/// `RES(q)` sampled on the uniform grid over `[0, var_y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCurve {
    pub points: Vec<ResidualPoint>,
    /// Number of regressors the curve was computed on.
    pub dim: usize,
    /// Every non-degenerate point is collinear with the leading eigenvector,
    /// so the curve carries no information about `g₂`.
    pub collinear: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G2Source {
    /// Minimizer of the residual curve.
    Residual,
    /// `λ₁ / m`, used when the residual curve is uninformative.
    EigenvalueFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub g2: f64,
    pub res_min: f64,
    pub source: G2Source,
    /// Grid index of the minimizer when `source` is `Residual`.
    pub grid_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Hard,
    Tractable,
}

/// Which check produced a Hard verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardCheck {
    /// `ĝ₂` on the full ensemble fell below the threshold.
    BeforePruning,
    /// `ĝ₂` recomputed on the survivors fell below the threshold.
    AfterPruning,
    /// Every regressor was pruned.
    NoSurvivors,
}

/// Outcome of the pruning rules for one regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    Kept,
    BelowAbsolute,
    BelowRelative,
    BelowBoth,
}

/// Quantities computed on one regressor subset: the initial pass over all
/// regressors, or the recomputation over the pruning survivors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFit {
    /// Indices into the original regressors.
    pub indices: Vec<usize>,
    /// Leading one or two eigenpairs of the covariance.
    pub eigen: EigenPairs,
    pub trace: f64,
    pub family: RhoFamily,
    pub curve: ResidualCurve,
    pub g2: G2Estimate,
    /// `ρ̂(ĝ₂)` over `indices`.
    pub rho_hat: Vec<f64>,
    /// Estimated MSE over `indices`.
    pub mse_estimates: Vec<f64>,
}

/// Result of the full pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEnsemble {
    pub regressor_names: Vec<String>,
    pub mean_y: f64,
    pub var_y: f64,
    pub regressor_means: Vec<f64>,
    pub bias_estimates: Vec<f64>,
    pub difficulty: Difficulty,
    pub hard_check: Option<HardCheck>,
    pub g2_hat: f64,
    /// Eigenpairs of the stage that produced the weights (or the last stage run).
    pub eigen: EigenPairs,
    /// `ρ̂(ĝ₂)` over the final stage's regressors.
    pub rho_hat: Vec<f64>,
    /// Estimated MSE for every original regressor. Kept regressors carry the
    /// recomputed value; pruned ones keep their initial-pass value.
    pub mse_estimates: Vec<f64>,
    pub pruning: Option<Vec<PruneRule>>,
    /// Absent for a Hard verdict.
    pub kept: Option<Vec<usize>>,
    /// Weights aligned with `kept`; absent for a Hard verdict.
    pub weights: Option<Vec<f64>>,
    pub used_two_pcs: bool,
    pub used_fallback_average: bool,
    pub initial: StageFit,
    pub refit: Option<StageFit>,
}

impl FittedEnsemble {
    pub fn is_hard(&self) -> bool {
        self.difficulty == Difficulty::Hard
    }

    pub fn num_regressors(&self) -> usize {
        self.regressor_names.len()
    }

    /// Names of the kept regressors, in weight order.
    pub fn kept_names(&self) -> Option<Vec<&str>> {
        self.kept.as_ref().map(|k| {
            k.iter()
                .map(|&i| self.regressor_names[i].as_str())
                .collect()
        })
    }

    /// Weight of each original regressor, zero for pruned ones.
    pub fn full_weights(&self) -> Option<Vec<f64>> {
        let (kept, weights) = (self.kept.as_ref()?, self.weights.as_ref()?);
        let mut full = vec![0.0; self.num_regressors()];
        for (&i, &w) in kept.iter().zip(weights) {
            full[i] = w;
        }
        Some(full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_family_shift() {
        let fam = RhoFamily {
            a0: vec![1.0, 2.0, 3.0],
            var_y: 10.0,
        };
        assert_eq!(fam.rho(4.0), vec![3.0, 4.0, 5.0]);
        assert_eq!(fam.rho(0.0), fam.a0);
        assert_eq!(fam.offsets(4.0), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn config_defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.grid_points, 201);
        assert_eq!(cfg.eps_l, 0.1);
        assert_eq!(cfg.prune_abs_frac, 0.05);
        assert_eq!(cfg.prune_rel_frac, 1.0 / 3.0);
        assert_eq!(cfg.two_pc_trace_frac, 0.1);
        assert_eq!(cfg.min_ensemble_size, 5);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_fractions() {
        let cfg = PipelineConfig {
            eps_l: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            grid_points: 1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn prediction_matrix_validation() {
        assert!(PredictionMatrix::from_rows(&[[1.0, f64::NAN]]).is_err());
        let dup = PredictionMatrix::new(
            vec!["a".into(), "a".into()],
            vec!["s".into()],
            Matrix::zeros(2, 1),
        );
        assert!(matches!(dup, Err(Error::DuplicateName { .. })));
        let ok = PredictionMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(ok.num_regressors(), 2);
        assert_eq!(ok.position("f1"), Some(1));
    }

    #[test]
    fn moments_need_positive_variance() {
        assert!(ResponseMoments::new(0.0, 0.0).is_err());
        assert!(ResponseMoments::new(f64::NAN, 1.0).is_err());
        assert!(ResponseMoments::new(0.0, 1.0).is_ok());
    }
}
