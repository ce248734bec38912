//! Additive-offset fits against independent oracles: dense normal equations
//! for squared loss, exhaustive vertex enumeration for absolute loss.

use proptest::prelude::*;
use upcr::estimator::{additive_objective, fit_additive_offsets, pair_list};
use upcr::linalg::SymMatrix;
use upcr::Loss;

fn random_c(m: usize, vals: &[f64]) -> SymMatrix {
    SymMatrix::from_fn(m, |i, j| vals[i * m + j].min(vals[j * m + i]))
}

/// Gauss–Jordan with partial pivoting on a small dense system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn normal_equations(c: &SymMatrix, q: f64) -> Vec<f64> {
    let m = c.dim();
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for (i, j) in pair_list(m) {
        let t = c.get(i, j) - q;
        for (x, y) in [(i, i), (j, j), (i, j), (j, i)] {
            ata[x][y] += 1.0;
        }
        atb[i] += t;
        atb[j] += t;
    }
    solve_dense(ata, atb).unwrap()
}

/// L1 minimum over all vertices: every choice of m pairs whose indicator rows
/// are independent, solved exactly.
fn l1_vertex_minimum(c: &SymMatrix, q: f64) -> f64 {
    let m = c.dim();
    let pairs = pair_list(m);
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m);
    fn recurse(
        start: usize,
        pairs: &[(usize, usize)],
        chosen: &mut Vec<usize>,
        c: &SymMatrix,
        q: f64,
        best: &mut f64,
    ) {
        let m = c.dim();
        if chosen.len() == m {
            let a: Vec<Vec<f64>> = chosen
                .iter()
                .map(|&p| {
                    let (i, j) = pairs[p];
                    (0..m)
                        .map(|k| if k == i || k == j { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect();
            let b: Vec<f64> = chosen
                .iter()
                .map(|&p| c.get(pairs[p].0, pairs[p].1) - q)
                .collect();
            if let Some(x) = solve_dense(a, b) {
                *best = best.min(additive_objective(c, q, &x, Loss::Absolute));
            }
            return;
        }
        for p in start..pairs.len() {
            chosen.push(p);
            recurse(p + 1, pairs, chosen, c, q, best);
            chosen.pop();
        }
    }
    recurse(0, &pairs, &mut chosen, c, q, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn shift_identity_both_losses(
        m in prop::sample::select(vec![3usize, 5, 10]),
        vals in prop::collection::vec(-2.0..2.0f64, 100),
        qs in prop::collection::vec(0.0..3.0f64, 5),
    ) {
        let c = random_c(m, &vals);
        for loss in [Loss::Squared, Loss::Absolute] {
            let base = fit_additive_offsets(&c, 0.0, loss).unwrap();
            for &q in &qs {
                let shifted = fit_additive_offsets(&c, q, loss).unwrap();
                for (s, b) in shifted.iter().zip(&base) {
                    prop_assert!((s - (b - q / 2.0)).abs() <= 1e-8, "{loss:?} q={q}: {s} vs {}", b - q / 2.0);
                }
            }
        }
    }

    #[test]
    fn squared_matches_normal_equations(
        m in 3usize..5,
        vals in prop::collection::vec(-2.0..2.0f64, 16),
        q in 0.0..2.0f64,
    ) {
        let c = random_c(m, &vals);
        let got = fit_additive_offsets(&c, q, Loss::Squared).unwrap();
        let want = normal_equations(&c, q);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10);
        }
    }

    #[test]
    fn absolute_reaches_vertex_minimum(
        m in 3usize..6,
        vals in prop::collection::vec(-2.0..2.0f64, 25),
        q in 0.0..2.0f64,
    ) {
        let c = random_c(m, &vals);
        let got = fit_additive_offsets(&c, q, Loss::Absolute).unwrap();
        let obj = additive_objective(&c, q, &got, Loss::Absolute);
        let oracle = l1_vertex_minimum(&c, q);
        prop_assert!(obj <= oracle + 1e-6, "objective {obj} vs oracle {oracle}");
    }

    #[test]
    fn noiseless_instances_recovered(
        m in 4usize..7,
        a in prop::collection::vec(-3.0..3.0f64, 6),
        q in 0.0..1.0f64,
    ) {
        let a = &a[..m];
        let c = SymMatrix::from_fn(m, |i, j| if i == j { 100.0 } else { q + a[i] + a[j] });
        for loss in [Loss::Squared, Loss::Absolute] {
            let got = fit_additive_offsets(&c, q, loss).unwrap();
            for (g, w) in got.iter().zip(a) {
                prop_assert!((g - w).abs() <= 1e-8, "{loss:?}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn absolute_grid_search_oracle_m3() {
    // With m = 3 the three pair equations are exactly determined, so the L1
    // optimum is zero; a coarse grid over a neighbourhood cannot beat it.
    let c = SymMatrix::from_rows(&[[0.0, 0.7, -0.2], [0.7, 0.0, 1.3], [-0.2, 1.3, 0.0]]).unwrap();
    let got = fit_additive_offsets(&c, 0.1, Loss::Absolute).unwrap();
    let obj = additive_objective(&c, 0.1, &got, Loss::Absolute);
    let mut grid_best = f64::INFINITY;
    let steps = 60;
    for x in 0..=steps {
        for y in 0..=steps {
            for z in 0..=steps {
                let p = |k: i32| -1.5 + 3.0 * k as f64 / steps as f64;
                let cand = [p(x), p(y), p(z)];
                grid_best = grid_best.min(additive_objective(&c, 0.1, &cand, Loss::Absolute));
            }
        }
    }
    assert!(obj <= grid_best + 1e-6);
    assert!(obj < 1e-10);
}
