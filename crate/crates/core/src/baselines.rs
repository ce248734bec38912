//! Reference aggregators and evaluation metrics.
//!
//! The mean and median need nothing but the predictions. The linear oracle
//! and GEM need labels and exist for evaluation only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, symmetric_eigen, Matrix, SymMatrix};
use crate::model::{PredictionMatrix, ResponseMoments};

/// Largest condition number GEM accepts before refusing to invert.
pub const GEM_MAX_CONDITION: f64 = 1e12;

/// Upper edge of the "easy" normalized-MSE band.
pub const EASY_BAND_MAX: f64 = 0.1;
/// Lower edge of the "hard" normalized-MSE band.
pub const HARD_BAND_MIN: f64 = 0.8;

pub fn ensemble_mean(preds: &PredictionMatrix) -> Vec<f64> {
    let m = preds.num_regressors() as f64;
    let mut out = vec![0.0; preds.num_samples()];
    for row in preds.values().rows_iter() {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
    }
    out.iter_mut().for_each(|o| *o /= m);
    out
}

/// Column-wise median; an even count takes the midpoint of the two central
/// values.
pub fn ensemble_median(preds: &PredictionMatrix) -> Vec<f64> {
    let m = preds.num_regressors();
    let mut column = vec![0.0; m];
    (0..preds.num_samples())
        .map(|j| {
            for (i, c) in column.iter_mut().enumerate() {
                *c = preds.values().get(i, j);
            }
            column.sort_by(f64::total_cmp);
            if m % 2 == 1 {
                column[m / 2]
            } else {
                0.5 * (column[m / 2 - 1] + column[m / 2])
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleWeights {
    pub weights: Vec<f64>,
    /// `Z Zᵀ` was singular and the minimum-norm solution was taken.
    pub rank_deficient: bool,
}

/// Ordinary least squares of `y − μ_Y` on the centered predictions:
/// `w = (Z Zᵀ)⁻¹ Z (y − μ_Y)`.
pub fn oracle_weights(z: &Matrix, y: &[f64], moments: &ResponseMoments) -> Result<OracleWeights> {
    if y.len() != z.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            y.len(),
            z.ncols()
        )));
    }
    let target: Vec<f64> = y.iter().map(|v| v - moments.mean_y).collect();
    let ls = least_squares(&z.transpose(), &target)?;
    Ok(OracleWeights {
        weights: ls.solution,
        rank_deficient: ls.rank_deficient,
    })
}

/// `μ_Y + Σ_i w_i Z_ij` for each sample.
pub fn linear_combination(z: &Matrix, weights: &[f64], mean_y: f64) -> Vec<f64> {
    let mut out = vec![mean_y; z.ncols()];
    for (row, w) in z.rows_iter().zip(weights) {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += w * v);
    }
    out
}

/// Misfit covariance `C*_ij = (1/n) Σ_k (f_i(x_k) − y_k)(f_j(x_k) − y_k)`.
pub fn misfit_covariance(preds: &PredictionMatrix, y: &[f64]) -> Result<SymMatrix> {
    let n = preds.num_samples();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} samples",
            y.len()
        )));
    }
    let misfits = Matrix::from_fn(preds.num_regressors(), n, |i, j| {
        preds.values().get(i, j) - y[j]
    });
    let inv_n = 1.0 / n as f64;
    Ok(SymMatrix::from_fn(preds.num_regressors(), |i, j| {
        crate::linalg::dot(misfits.row(i), misfits.row(j)) * inv_n
    }))
}

/// GEM weights `w_i = Σ_j C*⁻¹_ij / Σ_jk C*⁻¹_jk`; they sum to one.
pub fn gem_weights(c_star: &SymMatrix) -> Result<Vec<f64>> {
    let eig = symmetric_eigen(c_star);
    let lmax = eig.values[0];
    let lmin = *eig.values.last().expect("non-empty spectrum");
    if !(lmin > 0.0) || lmax / lmin > GEM_MAX_CONDITION {
        let condition = if lmin > 0.0 {
            lmax / lmin
        } else {
            f64::INFINITY
        };
        return Err(Error::IllConditioned { condition });
    }
    let m = c_star.dim();
    // Row sums of V Λ⁻¹ Vᵀ.
    let mut row_sums = vec![0.0; m];
    for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
        let coef = v.iter().sum::<f64>() / lambda;
        row_sums
            .iter_mut()
            .zip(v)
            .for_each(|(r, vi)| *r += coef * vi);
    }
    let total: f64 = row_sums.iter().sum();
    Ok(row_sums.into_iter().map(|r| r / total).collect())
}

/// `Σ_i w_i f_i(x_j)` on the raw predictions.
pub fn gem_predict(preds: &PredictionMatrix, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; preds.num_samples()];
    for (row, w) in preds.values().rows_iter().zip(weights) {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += w * v);
    }
    out
}

/// Regressor `i` with its sample mean replaced by `μ_Y`.
pub fn debiased_expert(preds: &PredictionMatrix, i: usize, moments: &ResponseMoments) -> Vec<f64> {
    let row = preds.regressor(i);
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    row.iter().map(|v| moments.mean_y + v - mean).collect()
}

/// Difficulty band of a normalized MSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyBand {
    Easy,
    Challenging,
    Hard,
}

impl DifficultyBand {
    pub fn of(normalized_mse: f64) -> Self {
        if normalized_mse < EASY_BAND_MAX {
            Self::Easy
        } else if normalized_mse > HARD_BAND_MIN {
            Self::Hard
        } else {
            Self::Challenging
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Challenging => "challenging",
            Self::Hard => "hard",
        }
    }
}

impl std::fmt::Display for DifficultyBand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mse: f64,
    pub normalized_mse: f64,
    pub band: DifficultyBand,
}

pub fn evaluate(y_hat: &[f64], y: &[f64], moments: &ResponseMoments) -> Result<Evaluation> {
    if y_hat.len() != y.len() || y.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions against {} labels",
            y_hat.len(),
            y.len()
        )));
    }
    let mse = y_hat
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64;
    let normalized_mse = mse / moments.var_y;
    Ok(Evaluation {
        mse,
        normalized_mse,
        band: DifficultyBand::of(normalized_mse),
    })
}
