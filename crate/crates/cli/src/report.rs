//! The JSON report written by `estimate`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use upcr::estimator::clamped;
use upcr::{Difficulty, FittedEnsemble, G2Source, HardCheck, Loss, PruneRule, ResidualPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorReport {
    pub name: String,
    /// `ρ̂_i` from the pass over all regressors.
    pub rho_hat: f64,
    pub mse_estimate: f64,
    /// `mse_estimate` floored at zero, for display.
    pub mse_estimate_clamped: f64,
    /// 1 for the lowest estimated MSE.
    pub mse_rank: usize,
    pub bias_estimate: f64,
    /// `None` when the verdict was reached before pruning.
    pub prune_rule: Option<PruneRule>,
    pub kept: bool,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub verdict: Difficulty,
    pub hard_check: Option<HardCheck>,
    pub g2_hat: f64,
    pub g2_ratio: f64,
    pub g2_source: G2Source,
    pub mean_y: f64,
    pub var_y: f64,
    pub loss: Loss,
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub trace: f64,
    pub lambda1_trace_fraction: f64,
    pub lambda2_trace_fraction: Option<f64>,
    pub used_two_pcs: bool,
    pub used_fallback_average: bool,
    pub regressors: Vec<RegressorReport>,
    pub residual_curve: Vec<ResidualPoint>,
    /// Curve of the recomputation on the survivors, when one ran.
    pub refit_residual_curve: Option<Vec<ResidualPoint>>,
    pub model: FittedEnsemble,
}

impl EstimateReport {
    pub fn new(fit: &FittedEnsemble, loss: Loss) -> Self {
        let stage = fit.refit.as_ref().unwrap_or(&fit.initial);
        let lambda1 = stage.eigen.values[0];
        let lambda2 = stage.eigen.values.get(1).copied();
        let m = fit.num_regressors();

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| fit.mse_estimates[a].total_cmp(&fit.mse_estimates[b]));
        let mut rank = vec![0; m];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r + 1;
        }
        let weights = fit.full_weights();
        let display = clamped(&fit.mse_estimates);
        let regressors = (0..m)
            .map(|i| {
                let prune_rule = fit.pruning.as_ref().map(|p| p[i]);
                RegressorReport {
                    name: fit.regressor_names[i].clone(),
                    rho_hat: fit.initial.rho_hat[i],
                    mse_estimate: fit.mse_estimates[i],
                    mse_estimate_clamped: display[i],
                    mse_rank: rank[i],
                    bias_estimate: fit.bias_estimates[i],
                    prune_rule,
                    kept: fit.kept.as_ref().is_some_and(|k| k.contains(&i)),
                    weight: weights.as_ref().map(|w| w[i]),
                }
            })
            .collect();

        Self {
            verdict: fit.difficulty,
            hard_check: fit.hard_check,
            g2_hat: fit.g2_hat,
            g2_ratio: fit.g2_hat / fit.var_y,
            g2_source: stage.g2.source,
            mean_y: fit.mean_y,
            var_y: fit.var_y,
            loss,
            lambda1,
            lambda2,
            trace: stage.trace,
            lambda1_trace_fraction: lambda1 / stage.trace,
            lambda2_trace_fraction: lambda2.map(|l| l / stage.trace),
            used_two_pcs: fit.used_two_pcs,
            used_fallback_average: fit.used_fallback_average,
            regressors,
            residual_curve: fit.initial.curve.points.clone(),
            refit_residual_curve: fit.refit.as_ref().map(|r| r.curve.points.clone()),
            model: fit.clone(),
        }
    }

    /// Plain-text digest for terminals.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let verdict = match self.verdict {
            Difficulty::Hard => "HARD",
            Difficulty::Tractable => "tractable",
        };
        let _ = writeln!(s, "verdict: {verdict}");
        if let Some(check) = self.hard_check {
            let _ = writeln!(s, "hard check: {check:?}");
        }
        let _ = writeln!(
            s,
            "g2_hat = {:.6} ({:.3} of var_y, {:?})",
            self.g2_hat, self.g2_ratio, self.g2_source
        );
        let _ = writeln!(s, "lambda1/trace = {:.4}", self.lambda1_trace_fraction);
        if self.used_two_pcs {
            let _ = writeln!(s, "second principal component used");
        }
        if self.used_fallback_average {
            let _ = writeln!(s, "too few survivors: plain average");
        }
        let width = self
            .regressors
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let _ = writeln!(
            s,
            "{:<width$}  {:>4}  {:>12}  {:>12}  {:>10}  status",
            "name", "rank", "rho_hat", "mse_est", "weight"
        );
        for r in &self.regressors {
            let weight = r.weight.map_or("-".to_string(), |w| format!("{w:.6}"));
            let status = match r.prune_rule {
                None => "-",
                Some(PruneRule::Kept) => "kept",
                Some(PruneRule::BelowAbsolute) => "pruned (absolute)",
                Some(PruneRule::BelowRelative) => "pruned (relative)",
                Some(PruneRule::BelowBoth) => "pruned (both)",
            };
            let _ = writeln!(
                s,
                "{:<width$}  {:>4}  {:>12.6}  {:>12.6}  {:>10}  {status}",
                r.name, r.mse_rank, r.rho_hat, r.mse_estimate_clamped, weight
            );
        }
        s
    }
}
