//! The U-PCR pipeline.
//!
//! Given only the prediction matrix and the response moments, the pipeline
//! centers every regressor, fits additive offsets to the off-diagonal
//! covariance entries, selects `ĝ₂` by projecting `ρ̂(q)` on the leading
//! eigenvector, decides whether the problem is tractable, prunes weak
//! regressors, recomputes on the survivors and finally builds principal
//! component weights.

mod offsets;
mod residual;

pub use offsets::{
    additive_objective, fit_additive_offsets, pair_design, pair_list, pair_targets, IRLS_MAX_ITER,
    IRLS_REL_TOL, IRLS_SMOOTHING,
};
pub use residual::{
    estimate_g2, projection_residual, q_grid, residual_curve, COLLINEAR_TOL, DEGENERATE_NORM,
};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{dot, sample_covariance, top_eigenpairs, EigenPairs, Matrix, SymMatrix};
use crate::model::{
    CenteredData, Difficulty, FittedEnsemble, HardCheck, PipelineConfig, PredictionMatrix,
    PruneRule, ResponseMoments, RhoFamily, StageFit,
};

/// Leading eigenvalues at or below this fraction of the trace are rejected.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-12;

/// Removes each regressor's sample mean.
pub fn center_predictions(
    preds: &PredictionMatrix,
    moments: &ResponseMoments,
) -> Result<CenteredData> {
    let n = preds.num_samples();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: n,
        });
    }
    let values = preds.values();
    let mut z = Matrix::zeros(values.nrows(), n);
    let mut bias_estimates = Vec::with_capacity(values.nrows());
    let mut regressor_means = Vec::with_capacity(values.nrows());
    for (i, row) in values.rows_iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
        let mean = row.iter().sum::<f64>() / n as f64;
        for (dst, v) in z.row_mut(i).iter_mut().zip(row) {
            *dst = v - mean;
        }
        regressor_means.push(mean);
        bias_estimates.push(mean - moments.mean_y);
    }
    Ok(CenteredData {
        z,
        bias_estimates,
        regressor_means,
    })
}

/// `MSE_i = var(Y) − 2ρ̂_i + Ĉ_ii`. Noisy inputs can make entries negative;
/// they are returned unclamped.
pub fn estimate_regressor_mse(
    rho_hat: &[f64],
    c_hat: &SymMatrix,
    moments: &ResponseMoments,
) -> Result<Vec<f64>> {
    if rho_hat.len() != c_hat.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariances for a {}x{} matrix",
            rho_hat.len(),
            c_hat.dim(),
            c_hat.dim()
        )));
    }
    Ok(rho_hat
        .iter()
        .enumerate()
        .map(|(i, rho)| moments.var_y - 2.0 * rho + c_hat.get(i, i))
        .collect())
}

/// Display copy of MSE estimates with negative values clamped to zero.
pub fn clamped(mse: &[f64]) -> Vec<f64> {
    mse.iter().map(|v| v.max(0.0)).collect()
}

/// Applies both pruning thresholds in one pass.
pub fn prune_rules(
    rho_hat: &[f64],
    moments: &ResponseMoments,
    cfg: &PipelineConfig,
) -> Vec<PruneRule> {
    let rho_max = rho_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let abs_floor = cfg.prune_abs_frac * moments.var_y;
    let rel_floor = cfg.prune_rel_frac * rho_max;
    rho_hat
        .iter()
        .map(|&rho| match (rho < abs_floor, rho < rel_floor) {
            (false, false) => PruneRule::Kept,
            (true, false) => PruneRule::BelowAbsolute,
            (false, true) => PruneRule::BelowRelative,
            (true, true) => PruneRule::BelowBoth,
        })
        .collect()
}

/// Indices surviving `ρ̂_i ≥ prune_abs_frac·var_y` and
/// `ρ̂_i ≥ prune_rel_frac·ρ_max`. An empty set is an error.
pub fn prune_regressors(
    rho_hat: &[f64],
    moments: &ResponseMoments,
    cfg: &PipelineConfig,
) -> Result<Vec<usize>> {
    let kept: Vec<usize> = prune_rules(rho_hat, moments, cfg)
        .iter()
        .enumerate()
        .filter(|(_, r)| **r == PruneRule::Kept)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        Err(Error::NoSurvivors)
    } else {
        Ok(kept)
    }
}

/// Principal component weights `(v₁ᵀρ̂/λ₁)v₁`, plus `(v₂ᵀρ̂/λ₂)v₂` when
/// `λ₂ > two_pc_trace_frac · trace`. Returns the weights and whether the
/// second component was used.
pub fn compute_weights(
    eigen: &EigenPairs,
    rho_hat: &[f64],
    trace: f64,
    cfg: &PipelineConfig,
) -> Result<(Vec<f64>, bool)> {
    let Some(&lambda1) = eigen.values.first() else {
        return Err(Error::DimensionMismatch("no eigenpairs supplied".into()));
    };
    if !(lambda1 > DEGENERATE_EIGENVALUE * trace) || lambda1 <= 0.0 {
        return Err(Error::DegenerateCovariance { lambda1, trace });
    }
    if eigen.vectors.iter().any(|v| v.len() != rho_hat.len()) {
        return Err(Error::DimensionMismatch(format!(
            "eigenvectors do not match {} covariances",
            rho_hat.len()
        )));
    }
    let components = match eigen.values.get(1) {
        Some(&lambda2) if lambda2 > cfg.two_pc_trace_frac * trace => 2,
        _ => 1,
    };
    let mut w = vec![0.0; rho_hat.len()];
    for k in 0..components {
        let v = &eigen.vectors[k];
        let coef = dot(v, rho_hat) / eigen.values[k];
        w.iter_mut().zip(v).for_each(|(wi, vi)| *wi += coef * vi);
    }
    Ok((w, components == 2))
}

/// Runs the covariance → eigenvector → offsets → `ĝ₂` chain on a subset.
fn fit_stage(
    c_all: &SymMatrix,
    indices: &[usize],
    moments: &ResponseMoments,
    cfg: &PipelineConfig,
) -> Result<StageFit> {
    let c = c_all.submatrix(indices);
    let eigen = top_eigenpairs(&c, c.dim().min(2))?;
    let trace = c.trace();
    let family = RhoFamily {
        a0: fit_additive_offsets(&c, 0.0, cfg.loss)?,
        var_y: moments.var_y,
    };
    let curve = residual_curve(&family, &eigen.vectors[0], cfg.grid_points)?;
    let g2 = estimate_g2(&curve, eigen.values[0])?;
    let rho_hat = family.rho(g2.g2);
    let mse_estimates = estimate_regressor_mse(&rho_hat, &c, moments)?;
    Ok(StageFit {
        indices: indices.to_vec(),
        eigen,
        trace,
        family,
        curve,
        g2,
        rho_hat,
        mse_estimates,
    })
}

/// The full unsupervised pipeline.
///
/// A Hard verdict is returned (not an error) when `ĝ₂ < eps_l · var_y`,
/// either on the full ensemble or after recomputation on the survivors, or
/// when pruning removes every regressor. Pruning runs once; with fewer than
/// three survivors the recomputation is skipped. Fewer than
/// `min_ensemble_size` survivors get uniform weights.
pub fn upcr_fit(
    preds: &PredictionMatrix,
    moments: &ResponseMoments,
    cfg: &PipelineConfig,
) -> Result<FittedEnsemble> {
    cfg.validate()?;
    let m = preds.num_regressors();
    if m < 3 {
        return Err(Error::TooFewRegressors {
            required: 3,
            got: m,
        });
    }
    let centered = center_predictions(preds, moments)?;
    let c_hat = sample_covariance(&centered.z)?;
    let all: Vec<usize> = (0..m).collect();
    let initial = fit_stage(&c_hat, &all, moments, cfg)?;
    let hard_floor = cfg.eps_l * moments.var_y;

    let mut fit = FittedEnsemble {
        regressor_names: preds.regressor_names().to_vec(),
        mean_y: moments.mean_y,
        var_y: moments.var_y,
        regressor_means: centered.regressor_means,
        bias_estimates: centered.bias_estimates,
        difficulty: Difficulty::Hard,
        hard_check: None,
        g2_hat: initial.g2.g2,
        eigen: initial.eigen.clone(),
        rho_hat: initial.rho_hat.clone(),
        mse_estimates: initial.mse_estimates.clone(),
        pruning: None,
        kept: None,
        weights: None,
        used_two_pcs: false,
        used_fallback_average: false,
        initial,
        refit: None,
    };

    if fit.initial.g2.g2 < hard_floor {
        fit.hard_check = Some(HardCheck::BeforePruning);
        return Ok(fit);
    }

    let rules = prune_rules(&fit.initial.rho_hat, moments, cfg);
    let kept: Vec<usize> = (0..m).filter(|&i| rules[i] == PruneRule::Kept).collect();
    fit.pruning = Some(rules);
    if kept.is_empty() {
        fit.hard_check = Some(HardCheck::NoSurvivors);
        return Ok(fit);
    }

    if kept.len() < m && kept.len() >= 3 {
        let refit = fit_stage(&c_hat, &kept, moments, cfg)?;
        for (&i, &mse) in kept.iter().zip(&refit.mse_estimates) {
            fit.mse_estimates[i] = mse;
        }
        fit.g2_hat = refit.g2.g2;
        fit.eigen = refit.eigen.clone();
        fit.rho_hat = refit.rho_hat.clone();
        let too_hard = refit.g2.g2 < hard_floor;
        fit.refit = Some(refit);
        if too_hard {
            fit.hard_check = Some(HardCheck::AfterPruning);
            return Ok(fit);
        }
    } else if kept.len() < m {
        fit.rho_hat = kept.iter().map(|&i| fit.initial.rho_hat[i]).collect();
    }

    // Stage whose quantities live on exactly the kept set.
    let stage = match &fit.refit {
        Some(refit) => Some(refit),
        None if kept.len() == m => Some(&fit.initial),
        None => None,
    };
    let weights = match stage {
        Some(stage) if kept.len() >= cfg.min_ensemble_size => {
            let (w, two) = compute_weights(&stage.eigen, &stage.rho_hat, stage.trace, cfg)?;
            fit.used_two_pcs = two;
            w
        }
        _ => {
            fit.used_fallback_average = true;
            vec![1.0 / kept.len() as f64; kept.len()]
        }
    };

    fit.difficulty = Difficulty::Tractable;
    fit.kept = Some(kept);
    fit.weights = Some(weights);
    Ok(fit)
}

/// `ŷ_j = μ_Y + Σ_{i∈kept} w_i (f_i(x_j) − μ̂_i)` with the means stored at fit
/// time. Regressors are matched by name, so column order does not matter.
pub fn predict(fit: &FittedEnsemble, preds: &PredictionMatrix) -> Result<Vec<f64>> {
    let (Some(kept), Some(weights)) = (fit.kept.as_ref(), fit.weights.as_ref()) else {
        return Err(Error::HardModel);
    };
    let index: HashMap<&str, usize> = preds
        .regressor_names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let rows = kept
        .iter()
        .map(|&k| {
            let name = &fit.regressor_names[k];
            index
                .get(name.as_str())
                .map(|&row| (preds.regressor(row), fit.regressor_means[k]))
                .ok_or_else(|| Error::MissingRegressor(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((0..preds.num_samples())
        .map(|j| {
            let mut y = fit.mean_y;
            for ((row, mean), w) in rows.iter().zip(weights) {
                y += w * (row[j] - mean);
            }
            y
        })
        .collect())
}
