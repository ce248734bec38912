//! Small-deviation behaviour of the leading eigenpair of the population
//! covariance `C(ε) = g₂𝟙𝟙ᵀ + ε(a𝟙ᵀ + 𝟙aᵀ) + ε²D`.
//!
//! The first-order predictions are `λ₁ ≈ g₂m + 2(aᵀ𝟙)ε` and
//! `v₁ ∝ g₂𝟙 + (a − (aᵀ𝟙/m)𝟙)ε`; both remainders are `O(ε²)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, norm, symmetric_eigen, Matrix, SymMatrix};

/// Errors at or below this level are rounding noise and excluded from slope
/// fits.
pub const ERROR_FLOOR: f64 = 1e-13;

pub fn population_covariance(g2: f64, a: &[f64], d: &[f64], epsilon: f64) -> SymMatrix {
    SymMatrix::from_fn(a.len(), |i, j| {
        let diag = if i == j {
            epsilon * epsilon * d[i]
        } else {
            0.0
        };
        g2 + epsilon * (a[i] + a[j]) + diag
    })
}

pub fn first_order_eigenvalue(g2: f64, a: &[f64], epsilon: f64) -> f64 {
    g2 * a.len() as f64 + 2.0 * a.iter().sum::<f64>() * epsilon
}

/// First-order leading eigenvector, normalized to unit length.
pub fn first_order_eigenvector(g2: f64, a: &[f64], epsilon: f64) -> Vec<f64> {
    let mean_a = a.iter().sum::<f64>() / a.len() as f64;
    let v: Vec<f64> = a.iter().map(|ai| g2 + (ai - mean_a) * epsilon).collect();
    let nv = norm(&v);
    v.into_iter().map(|x| x / nv).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub epsilons: Vec<f64>,
    /// `|λ₁(ε) − (g₂m + 2aᵀ𝟙ε)|`.
    pub lambda_errors: Vec<f64>,
    /// Euclidean distance between the unit leading eigenvector and the unit
    /// first-order prediction.
    pub eigvec_errors: Vec<f64>,
    /// Log-log slope of `lambda_errors` against `ε`; `None` when fewer than
    /// two errors rise above the rounding floor.
    pub lambda_slope: Option<f64>,
    pub eigvec_slope: Option<f64>,
}

/// Measures how fast the first-order predictions degrade as `ε` grows.
pub fn perturbation_slopes(
    g2: f64,
    a: &[f64],
    d: &[f64],
    epsilons: &[f64],
) -> Result<PerturbationReport> {
    if a.len() != d.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} offsets against {} deviation variances",
            a.len(),
            d.len()
        )));
    }
    if !(g2 > 0.0) {
        return Err(Error::InvalidSpec(format!("g2 must be positive, got {g2}")));
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e <= 0.1)) {
        return Err(Error::InvalidSpec(
            "every epsilon must lie in (0, 0.1]".into(),
        ));
    }

    let mut lambda_errors = Vec::with_capacity(epsilons.len());
    let mut eigvec_errors = Vec::with_capacity(epsilons.len());
    let scale = g2 * a.len() as f64;
    for &eps in epsilons {
        let eig = symmetric_eigen(&population_covariance(g2, a, d, eps));
        lambda_errors.push((eig.values[0] - first_order_eigenvalue(g2, a, eps)).abs());
        let predicted = first_order_eigenvector(g2, a, eps);
        let diff: Vec<f64> = eig.vectors[0]
            .iter()
            .zip(&predicted)
            .map(|(x, y)| x - y)
            .collect();
        eigvec_errors.push(norm(&diff));
    }
    Ok(PerturbationReport {
        lambda_slope: log_log_slope(epsilons, &lambda_errors, ERROR_FLOOR * scale)?,
        eigvec_slope: log_log_slope(epsilons, &eigvec_errors, ERROR_FLOOR)?,
        epsilons: epsilons.to_vec(),
        lambda_errors,
        eigvec_errors,
    })
}

/// Least-squares slope of `log y` on `log x` over the points with `y > floor`.
pub fn log_log_slope(x: &[f64], y: &[f64], floor: f64) -> Result<Option<f64>> {
    let points: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &yi)| yi > floor)
        .map(|(&xi, &yi)| (xi.ln(), yi.ln()))
        .collect();
    if points.len() < 2 {
        return Ok(None);
    }
    let design = Matrix::from_fn(
        points.len(),
        2,
        |i, j| if j == 0 { 1.0 } else { points[i].0 },
    );
    let rhs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = least_squares(&design, &rhs)?;
    Ok(Some(fit.solution[1]))
}
