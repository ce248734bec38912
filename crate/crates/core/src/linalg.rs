//! Small dense linear algebra: row-major matrices, symmetric matrices,
//! sample covariance, cyclic Jacobi eigendecomposition and least squares.
//!
//! Everything here is sized for ensembles of a few dozen regressors. All
//! reductions run in a fixed index order, so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on row means accepted by [`sample_covariance`].
pub const CENTERING_TOL: f64 = 1e-8;

/// Columns of the pivoted QR factor whose diagonal falls below this fraction
/// of the leading diagonal are treated as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Keeps the listed rows, in the listed order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length must match column count");
        self.rows_iter().map(|row| dot(row, x)).collect()
    }

    /// Computes `selfᵀ · y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "vector length must match row count");
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.rows_iter().zip(y) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows_iter().map(<[f64]>::to_vec).collect()
    }
}

/// Symmetric matrix. Writes go to both triangles, so `get(i, j) == get(j, i)`
/// holds bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.set(i, i, 1.0);
        }
        s
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut s = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            s.set(i, i, v);
        }
        s
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    /// Builds from a full square grid, which must already be exactly symmetric.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let m = Matrix::from_rows(rows)?;
        if m.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {dim}x{}",
                m.ncols()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::DimensionMismatch(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self { dim, data: m.data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length must match dimension");
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    /// Principal submatrix on `indices`, in the listed order.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |a, b| self.get(indices[a], indices[b]))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.dim.max(1))
            .take(self.dim)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(s: SymMatrix) -> Self {
        s.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

/// Eigenvalues in non-increasing order with unit eigenvectors.
///
/// Every vector has a non-negative entry sum; when the sum is zero its first
/// nonzero entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.values.truncate(k);
        self.vectors.truncate(k);
        self
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Ĉ = Z Zᵀ / n` for a matrix whose rows are already centered.
pub fn sample_covariance(z: &Matrix) -> Result<SymMatrix> {
    let (m, n) = (z.nrows(), z.ncols());
    if m == 0 {
        return Err(Error::DimensionMismatch(
            "covariance of an empty matrix".into(),
        ));
    }
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: n,
        });
    }
    for (i, row) in z.rows_iter().enumerate() {
        let mean = row.iter().sum::<f64>() / n as f64;
        let scale = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if !mean.is_finite() || mean.abs() > CENTERING_TOL * scale {
            return Err(Error::NotCentered { row: i, mean });
        }
    }
    let inv_n = 1.0 / n as f64;
    Ok(SymMatrix::from_fn(m, |i, j| {
        dot(z.row(i), z.row(j)) * inv_n
    }))
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(s: &SymMatrix) -> EigenPairs {
    let dim = s.dim();
    let mut a = s.data.clone();
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let at = |i: usize, j: usize| i * dim + j;

    let frob = s.frobenius_norm();
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += a[at(p, q)] * a[at(p, q)];
            }
        }
        if off == 0.0 || off.sqrt() <= 1e-17 * frob {
            break;
        }

        let mut rotated = false;
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[at(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[at(p, p)];
                let aqq = a[at(q, q)];
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[at(p, q)] = 0.0;
                    a[at(q, p)] = 0.0;
                    continue;
                }
                rotated = true;

                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..dim {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[at(k, p)];
                    let akq = a[at(k, q)];
                    let new_kp = c * akp - sn * akq;
                    let new_kq = sn * akp + c * akq;
                    a[at(k, p)] = new_kp;
                    a[at(p, k)] = new_kp;
                    a[at(k, q)] = new_kq;
                    a[at(q, k)] = new_kq;
                }
                a[at(p, p)] = app - t * apq;
                a[at(q, q)] = aqq + t * apq;
                a[at(p, q)] = 0.0;
                a[at(q, p)] = 0.0;

                for k in 0..dim {
                    let vkp = v[at(k, p)];
                    let vkq = v[at(k, q)];
                    v[at(k, p)] = c * vkp - sn * vkq;
                    v[at(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| a[at(j, j)].total_cmp(&a[at(i, i)]));

    let mut values = Vec::with_capacity(dim);
    let mut vectors = Vec::with_capacity(dim);
    for &col in &order {
        values.push(a[at(col, col)]);
        let mut vec: Vec<f64> = (0..dim).map(|k| v[at(k, col)]).collect();
        let nrm = norm(&vec);
        vec.iter_mut().for_each(|x| *x /= nrm);
        apply_sign_convention(&mut vec);
        vectors.push(vec);
    }
    EigenPairs { values, vectors }
}

/// The `k` leading eigenpairs of `s`.
pub fn top_eigenpairs(s: &SymMatrix, k: usize) -> Result<EigenPairs> {
    if k == 0 || k > s.dim() {
        return Err(Error::DimensionMismatch(format!(
            "requested {k} eigenpairs of a {0}x{0} matrix",
            s.dim()
        )));
    }
    Ok(symmetric_eigen(s).truncated(k))
}

/// Flips `v` so its entries sum to a non-negative value; a zero sum defers to
/// the first nonzero entry.
pub fn apply_sign_convention(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    let flip = if sum.abs() > 1e-12 * l1 {
        sum < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Solution of a linear least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    /// Numerical rank of the design.
    pub rank: usize,
    /// Set when the design was rank deficient and the minimum-norm minimizer
    /// was returned.
    pub rank_deficient: bool,
}

/// Minimizes `‖A x − b‖₂`; the minimum-norm minimizer when `A` is rank
/// deficient.
///
/// Uses Householder QR with column pivoting. Rank-deficient problems go
/// through a complete orthogonal decomposition.
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<LeastSquares> {
    let (p, r) = (a.nrows(), a.ncols());
    if b.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "design has {p} rows but the target has {} entries",
            b.len()
        )));
    }
    if p < r {
        return Err(Error::DimensionMismatch(format!(
            "least squares needs at least as many rows as columns, got {p}x{r}"
        )));
    }
    if r == 0 {
        return Ok(LeastSquares {
            solution: Vec::new(),
            rank: 0,
            rank_deficient: false,
        });
    }

    let qr = HouseholderQr::new(a.clone(), true);
    let mut c = b.to_vec();
    qr.apply_qt(&mut c);

    let rank = qr.rank();
    let mut y = vec![0.0; r];
    if rank == r {
        back_substitute(&qr.factors, r, &c, &mut y);
    } else if rank > 0 {
        // T = [R11 R12] is rank x r; factor Tᵀ = Q2 R2 and take
        // y = Q2 [R2⁻ᵀ c1; 0], the minimum-norm solution of T y = c1.
        let t_tr = Matrix::from_fn(
            r,
            rank,
            |i, j| if i >= j { qr.factors.get(j, i) } else { 0.0 },
        );
        let qr2 = HouseholderQr::new(t_tr, false);
        let mut z = vec![0.0; r];
        for i in 0..rank {
            let mut s = c[i];
            for j in 0..i {
                s -= qr2.factors.get(j, i) * z[j];
            }
            z[i] = s / qr2.factors.get(i, i);
        }
        qr2.apply_q(&mut z);
        y = z;
    }

    let mut solution = vec![0.0; r];
    for (j, &col) in qr.perm.iter().enumerate() {
        solution[col] = y[j];
    }
    Ok(LeastSquares {
        solution,
        rank,
        rank_deficient: rank < r,
    })
}

fn back_substitute(r_factor: &Matrix, r: usize, c: &[f64], y: &mut [f64]) {
    for i in (0..r).rev() {
        let mut s = c[i];
        for j in (i + 1)..r {
            s -= r_factor.get(i, j) * y[j];
        }
        y[i] = s / r_factor.get(i, i);
    }
}

/// Compact Householder QR: `R` on and above the diagonal, reflector tails
/// below it.
struct HouseholderQr {
    factors: Matrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl HouseholderQr {
    fn new(mut a: Matrix, pivot: bool) -> Self {
        let (p, r) = (a.nrows(), a.ncols());
        let steps = p.min(r);
        let mut tau = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..r).collect();

        for k in 0..steps {
            if pivot {
                let col_norm =
                    |a: &Matrix, j: usize| (k..p).map(|i| a.get(i, j).powi(2)).sum::<f64>();
                let mut best = k;
                let mut best_norm = col_norm(&a, k);
                for j in (k + 1)..r {
                    let nj = col_norm(&a, j);
                    if nj > best_norm {
                        best = j;
                        best_norm = nj;
                    }
                }
                if best != k {
                    for i in 0..p {
                        let tmp = a.get(i, k);
                        a.set(i, k, a.get(i, best));
                        a.set(i, best, tmp);
                    }
                    perm.swap(k, best);
                }
            }

            let alpha = a.get(k, k);
            let tail: f64 = ((k + 1)..p)
                .map(|i| a.get(i, k).powi(2))
                .sum::<f64>()
                .sqrt();
            if tail == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            // signum(+0.0) is 1, so a zero pivot still gets a nonzero beta.
            let beta = -alpha.signum() * alpha.hypot(tail);
            tau[k] = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            for i in (k + 1)..p {
                a.set(i, k, a.get(i, k) * scale);
            }
            a.set(k, k, beta);

            for j in (k + 1)..r {
                let mut s = a.get(k, j);
                for i in (k + 1)..p {
                    s += a.get(i, k) * a.get(i, j);
                }
                s *= tau[k];
                a.set(k, j, a.get(k, j) - s);
                for i in (k + 1)..p {
                    a.set(i, j, a.get(i, j) - s * a.get(i, k));
                }
            }
        }
        Self {
            factors: a,
            tau,
            perm,
        }
    }

    fn rank(&self) -> usize {
        let steps = self.tau.len();
        if steps == 0 {
            return 0;
        }
        let lead = self.factors.get(0, 0).abs();
        if lead == 0.0 {
            return 0;
        }
        (0..steps)
            .take_while(|&k| self.factors.get(k, k).abs() > RANK_TOL * lead)
            .count()
    }

    fn reflect(&self, k: usize, x: &mut [f64]) {
        let p = self.factors.nrows();
        let mut s = x[k];
        for i in (k + 1)..p {
            s += self.factors.get(i, k) * x[i];
        }
        s *= self.tau[k];
        x[k] -= s;
        for i in (k + 1)..p {
            x[i] -= s * self.factors.get(i, k);
        }
    }

    fn apply_qt(&self, x: &mut [f64]) {
        for k in 0..self.tau.len() {
            if self.tau[k] != 0.0 {
                self.reflect(k, x);
            }
        }
    }

    fn apply_q(&self, x: &mut [f64]) {
        for k in (0..self.tau.len()).rev() {
            if self.tau[k] != 0.0 {
                self.reflect(k, x);
            }
        }
    }
}
