//! Model selection for `g₂`: the projection residual of `ρ̂(q)` against the
//! leading covariance eigenvector, minimized over a uniform grid.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{G2Estimate, G2Source, ResidualCurve, ResidualPoint, RhoFamily};

/// `‖ρ̂(q)‖` below this fraction of `var_y` marks a grid point degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Curves whose non-degenerate residuals all stay below this are collinear.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// `grid_points` uniform values over `[0, var_y]`, both ends included.
pub fn q_grid(var_y: f64, grid_points: usize) -> Vec<f64> {
    let last = grid_points - 1;
    (0..grid_points)
        .map(|k| {
            if k == last {
                var_y
            } else {
                var_y * k as f64 / last as f64
            }
        })
        .collect()
}

/// `‖ρ − (v·ρ)v‖ / ‖ρ‖`, or `None` when `‖ρ‖ < floor`.
pub fn projection_residual(rho: &[f64], v1: &[f64], floor: f64) -> Option<f64> {
    let rho_norm = norm(rho);
    if rho_norm < floor {
        return None;
    }
    let c = dot(v1, rho);
    let perp = rho
        .iter()
        .zip(v1)
        .map(|(r, v)| (r - c * v).powi(2))
        .sum::<f64>()
        .sqrt();
    Some((perp / rho_norm).min(1.0))
}

/// Samples `RES(q)` over the grid.
pub fn residual_curve(family: &RhoFamily, v1: &[f64], grid_points: usize) -> Result<ResidualCurve> {
    if v1.len() != family.dim() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvector of length {} for {} regressors",
            v1.len(),
            family.dim()
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid_points must be at least 2, got {grid_points}"
        )));
    }
    if (norm(v1) - 1.0).abs() > 1e-8 {
        return Err(Error::DimensionMismatch(
            "leading eigenvector must have unit norm".into(),
        ));
    }
    let floor = DEGENERATE_NORM * family.var_y;
    let points: Vec<ResidualPoint> = q_grid(family.var_y, grid_points)
        .into_iter()
        .map(|q| match projection_residual(&family.rho(q), v1, floor) {
            Some(res) => ResidualPoint {
                q,
                res,
                degenerate: false,
            },
            None => ResidualPoint {
                q,
                res: 1.0,
                degenerate: true,
            },
        })
        .collect();
    let collinear = points
        .iter()
        .all(|p| p.degenerate || p.res <= COLLINEAR_TOL);
    Ok(ResidualCurve {
        points,
        dim: family.dim(),
        collinear,
    })
}

/// Picks `ĝ₂` as the grid point of smallest residual, ties going to the
/// smallest `q`. A collinear curve falls back to `λ₁ / m`, clipped to the grid
/// range.
pub fn estimate_g2(curve: &ResidualCurve, lambda1: f64) -> Result<G2Estimate> {
    let Some(last) = curve.points.last() else {
        return Err(Error::InvalidConfig("empty residual curve".into()));
    };
    if curve.collinear {
        let g2 = (lambda1 / curve.dim as f64).clamp(0.0, last.q);
        let res_min = curve
            .points
            .iter()
            .map(|p| p.res)
            .fold(f64::INFINITY, f64::min);
        return Ok(G2Estimate {
            g2,
            res_min,
            source: G2Source::EigenvalueFallback,
            grid_index: None,
        });
    }
    let mut best = 0;
    for (k, p) in curve.points.iter().enumerate().skip(1) {
        if p.res < curve.points[best].res {
            best = k;
        }
    }
    Ok(G2Estimate {
        g2: curve.points[best].q,
        res_min: curve.points[best].res,
        source: G2Source::Residual,
        grid_index: Some(best),
    })
}
