//! Additive-offset fit of the off-diagonal covariance structure
//! `Ĉ_ij ≈ q + a_i + a_j`.

use crate::error::{Error, Result};
use crate::linalg::{dot, least_squares, norm, Matrix, SymMatrix};
use crate::model::Loss;

/// Iteration cap for the absolute-loss solver.
pub const IRLS_MAX_ITER: usize = 100;
/// Relative objective change that stops the absolute-loss solver.
pub const IRLS_REL_TOL: f64 = 1e-10;
/// Smoothing `δ` of `|r| ≈ √(r² + δ²)`, relative to the largest
/// least-squares residual.
pub const IRLS_SMOOTHING: f64 = 1e-6;

/// Design of the pairwise problem: one row `e_i + e_j` per pair `i < j`, in
/// lexicographic pair order.
pub fn pair_design(m: usize) -> Matrix {
    let pairs = pair_list(m);
    Matrix::from_fn(pairs.len(), m, |row, col| {
        let (i, j) = pairs[row];
        if col == i || col == j {
            1.0
        } else {
            0.0
        }
    })
}

/// Pairs `(i, j)` with `i < j` in the row order of [`pair_design`].
pub fn pair_list(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect()
}

/// Pairwise targets `Ĉ_ij − q` in the row order of [`pair_design`].
pub fn pair_targets(c_hat: &SymMatrix, q: f64) -> Vec<f64> {
    pair_list(c_hat.dim())
        .into_iter()
        .map(|(i, j)| c_hat.get(i, j) - q)
        .collect()
}

/// `Σ_{i<j} L(Ĉ_ij − q − a_i − a_j)`.
pub fn additive_objective(c_hat: &SymMatrix, q: f64, offsets: &[f64], loss: Loss) -> f64 {
    pair_list(c_hat.dim())
        .into_iter()
        .map(|(i, j)| {
            let r = c_hat.get(i, j) - q - offsets[i] - offsets[j];
            match loss {
                Loss::Squared => r * r,
                Loss::Absolute => r.abs(),
            }
        })
        .sum()
}

/// Fits offsets `â(q)` minimizing `Σ_{i<j} L(Ĉ_ij − q − a_i − a_j)`.
///
/// Only off-diagonal entries of `c_hat` are read. With three or more
/// regressors the pair design has full column rank, so the squared-loss fit
/// is unique. The absolute loss is solved by iteratively reweighted least
/// squares on the smoothed loss, then snapped to the basic solution picked
/// out by the smallest residuals when that does not raise the L1 objective.
///
/// Substituting `a_i = a'_i − q/2` turns the problem at `q` into the problem
/// at zero, so it is solved once on the raw entries and shifted. An L1
/// optimum is often not unique; this picks the same point of the optimal
/// face for every `q`.
pub fn fit_additive_offsets(c_hat: &SymMatrix, q: f64, loss: Loss) -> Result<Vec<f64>> {
    let m = c_hat.dim();
    if m < 3 {
        return Err(Error::TooFewRegressors {
            required: 3,
            got: m,
        });
    }
    if !q.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "offset fit at non-finite q = {q}"
        )));
    }
    let design = pair_design(m);
    let targets = pair_targets(c_hat, 0.0);
    let ls = least_squares(&design, &targets)?.solution;
    let mut a = match loss {
        Loss::Squared => ls,
        Loss::Absolute => absolute_fit(&design, &targets, ls)?,
    };
    a.iter_mut().for_each(|v| *v -= q / 2.0);
    Ok(a)
}

fn residuals(design: &Matrix, targets: &[f64], x: &[f64]) -> Vec<f64> {
    design
        .rows_iter()
        .zip(targets)
        .map(|(row, t)| t - dot(row, x))
        .collect()
}

fn l1(r: &[f64]) -> f64 {
    r.iter().map(|v| v.abs()).sum()
}

fn absolute_fit(design: &Matrix, targets: &[f64], start: Vec<f64>) -> Result<Vec<f64>> {
    let r0 = residuals(design, targets, &start);
    let scale = r0.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()));
    let target_scale = targets.iter().fold(0.0_f64, |acc, t| acc.max(t.abs()));
    if scale <= 1e-14 * target_scale.max(f64::MIN_POSITIVE) {
        return Ok(start);
    }
    let delta = IRLS_SMOOTHING * scale;
    let smoothed = |r: &[f64]| r.iter().map(|v| v.hypot(delta)).sum::<f64>();

    let mut x = start;
    let mut r = r0;
    let mut objective = smoothed(&r);
    let mut weighted = design.clone();
    let mut rhs = vec![0.0; targets.len()];
    for _ in 0..IRLS_MAX_ITER {
        for (k, rk) in r.iter().enumerate() {
            let sw = rk.hypot(delta).recip().sqrt();
            for (dst, &src) in weighted.row_mut(k).iter_mut().zip(design.row(k)) {
                *dst = src * sw;
            }
            rhs[k] = targets[k] * sw;
        }
        x = least_squares(&weighted, &rhs)?.solution;
        r = residuals(design, targets, &x);
        let next = smoothed(&r);
        let change = (objective - next).abs() / objective.max(f64::MIN_POSITIVE);
        objective = next;
        if change < IRLS_REL_TOL {
            break;
        }
    }

    Ok(snap_to_vertex(design, targets, x, &r))
}

/// Replaces `x` by the exact solution on the `m` linearly independent pairs
/// with the smallest residuals, if that is no worse in L1.
fn snap_to_vertex(design: &Matrix, targets: &[f64], x: Vec<f64>, r: &[f64]) -> Vec<f64> {
    let m = design.ncols();
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()));

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut chosen = Vec::with_capacity(m);
    for k in order {
        let row = design.row(k);
        let mut u = row.to_vec();
        for b in &basis {
            let c = dot(b, &u);
            u.iter_mut().zip(b).for_each(|(ui, bi)| *ui -= c * bi);
        }
        let nu = norm(&u);
        if nu > 1e-8 * norm(row) {
            u.iter_mut().for_each(|v| *v /= nu);
            basis.push(u);
            chosen.push(k);
            if chosen.len() == m {
                break;
            }
        }
    }
    if chosen.len() < m {
        return x;
    }

    let square = design.select_rows(&chosen);
    let rhs: Vec<f64> = chosen.iter().map(|&k| targets[k]).collect();
    let Ok(vertex) = least_squares(&square, &rhs) else {
        return x;
    };
    if vertex.rank_deficient {
        return x;
    }
    let current = l1(r);
    let candidate = l1(&residuals(design, targets, &vertex.solution));
    if candidate <= current + 1e-12 * current {
        vertex.solution
    } else {
        x
    }
}
