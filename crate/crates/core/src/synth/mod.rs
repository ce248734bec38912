//! Synthetic ensembles under the error model `f_i = g + εh_i`.
//!
//! The deviations are built as `h_i = a_i·g/g₂ + r_i`, where the residual
//! block `r` has covariance `D − aaᵀ/g₂` and is independent of the signal.
//! This makes `E[h_i h_j] = 0` for `i ≠ j`, `E[h_i²] = D_ii` and
//! `E[h_i Y] = a_i` hold exactly, so the population `ρ` and `C` are known in
//! closed form. When `a = 0` the deviations are independent across experts.
//!
//! Every random quantity draws from its own ChaCha stream: stream 0 for the
//! signal, 1 for the label noise, `2 + k` for the `k`-th residual component.

pub mod friedman;
pub mod perturbation;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix, SymMatrix};
use crate::model::{PredictionMatrix, ResponseMoments};

pub use perturbation::{perturbation_slopes, population_covariance, PerturbationReport};

/// Tolerance on `Σ a_i² / (g₂ D_ii) ≤ 1`, the condition for `D − aaᵀ/g₂` to be
/// positive semidefinite.
const FEASIBILITY_TOL: f64 = 1e-12;

/// The conditional-mean signal `g(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    /// `g ~ N(0, g2)`, shifted by `mean`.
    Normal {
        g2: f64,
        #[serde(default)]
        mean: f64,
    },
    Friedman1,
    Friedman2,
    Friedman3,
}

impl Signal {
    /// `E[g]`, which is also `μ_Y`.
    pub fn mean(&self) -> f64 {
        match *self {
            Signal::Normal { mean, .. } => mean,
            Signal::Friedman1 => friedman::friedman1_moments().mean,
            Signal::Friedman2 => friedman::friedman2_moments().mean,
            Signal::Friedman3 => friedman::friedman3_moments().mean,
        }
    }

    /// `g₂ = Var(g)`.
    pub fn g2(&self) -> f64 {
        match *self {
            Signal::Normal { g2, .. } => g2,
            Signal::Friedman1 => friedman::friedman1_moments().variance,
            Signal::Friedman2 => friedman::friedman2_moments().variance,
            Signal::Friedman3 => friedman::friedman3_moments().variance,
        }
    }

    /// Label noise used when none is given: unit variance for #1, a 3:1
    /// signal-to-noise ratio in standard deviation for #2 and #3, and whatever
    /// brings `var_y` to 1 for the normal signal.
    pub fn default_noise_var(&self) -> f64 {
        match *self {
            Signal::Normal { g2, .. } => (1.0 - g2).max(0.0),
            Signal::Friedman1 => 1.0,
            Signal::Friedman2 | Signal::Friedman3 => self.g2() / 9.0,
        }
    }

    /// One raw draw of `g(X)`, not centered.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Signal::Normal { g2, mean } => mean + g2.sqrt() * rng.sample::<f64, _>(StandardNormal),
            Signal::Friedman1 => friedman::friedman1(&friedman::sample_friedman1_input(rng)),
            Signal::Friedman2 => friedman::friedman2(&friedman::sample_friedman23_input(rng)),
            Signal::Friedman3 => friedman::friedman3(&friedman::sample_friedman23_input(rng)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEnsembleSpec {
    pub m: usize,
    pub n: usize,
    pub signal: Signal,
    pub epsilon: f64,
    /// `D_ii = E[h_i²]`.
    pub h_variances: Vec<f64>,
    /// `a_i = E[h_i Y]`.
    pub a_values: Vec<f64>,
    /// Variance of `Y − g(X)`; `None` takes the signal's default.
    pub noise_var: Option<f64>,
    pub seed: u64,
}

impl SyntheticEnsembleSpec {
    /// Unit deviation variances, zero offsets, default noise.
    pub fn new(m: usize, n: usize, signal: Signal, epsilon: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            signal,
            epsilon,
            h_variances: vec![1.0; m],
            a_values: vec![0.0; m],
            noise_var: None,
            seed,
        }
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
            .unwrap_or_else(|| self.signal.default_noise_var())
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n < 2 {
            return Err(Error::InvalidSpec(format!(
                "need m ≥ 1 and n ≥ 2, got m={} n={}",
                self.m, self.n
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "epsilon must be finite and ≥ 0, got {}",
                self.epsilon
            )));
        }
        if self.h_variances.len() != self.m || self.a_values.len() != self.m {
            return Err(Error::InvalidSpec(format!(
                "{} deviation variances and {} offsets for {} experts",
                self.h_variances.len(),
                self.a_values.len(),
                self.m
            )));
        }
        if let Some(d) = self
            .h_variances
            .iter()
            .find(|d| !(d.is_finite() && **d >= 0.0))
        {
            return Err(Error::InvalidSpec(format!(
                "deviation variance {d} must be finite and ≥ 0"
            )));
        }
        if self.a_values.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidSpec("offsets must be finite".into()));
        }
        if let Signal::Normal { g2, mean } = self.signal {
            if !(g2.is_finite() && g2 > 0.0 && mean.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "normal signal needs finite g2 > 0, got {g2}"
                )));
            }
        }
        let noise = self.noise_var();
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise variance {noise} must be finite and ≥ 0"
            )));
        }
        let g2 = self.signal.g2();
        let mut load = 0.0;
        for (&a, &d) in self.a_values.iter().zip(&self.h_variances) {
            if a != 0.0 {
                if d == 0.0 {
                    return Err(Error::InvalidSpec(
                        "nonzero offset needs a positive deviation variance".into(),
                    ));
                }
                load += a * a / (g2 * d);
            }
        }
        if load > 1.0 + FEASIBILITY_TOL {
            return Err(Error::InvalidSpec(format!(
                "offsets too large for the deviation variances: Σ a²/(g₂D) = {load} > 1"
            )));
        }
        Ok(())
    }
}

/// Population quantities behind a generated ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub g2: f64,
    pub mean_y: f64,
    pub var_y: f64,
    pub noise_var: f64,
    pub epsilon: f64,
    pub a: Vec<f64>,
    pub h_variances: Vec<f64>,
    /// `ρ = g₂𝟙 + εa`.
    pub rho: Vec<f64>,
    /// `C(ε) = g₂𝟙𝟙ᵀ + ε(a𝟙ᵀ + 𝟙aᵀ) + ε²D`.
    pub c_population: SymMatrix,
}

impl GroundTruth {
    pub fn moments(&self) -> ResponseMoments {
        ResponseMoments {
            mean_y: self.mean_y,
            var_y: self.var_y,
        }
    }

    /// Population MSE of the fixed combination `μ_Y + Σ w_i (f_i − μ_Y)`.
    pub fn combination_mse(&self, w: &[f64]) -> f64 {
        let cw = self.c_population.mul_vec(w);
        let wcw: f64 = w.iter().zip(&cw).map(|(a, b)| a * b).sum();
        let wrho: f64 = w.iter().zip(&self.rho).map(|(a, b)| a * b).sum();
        self.var_y - 2.0 * wrho + wcw
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub predictions: PredictionMatrix,
    pub labels: Vec<f64>,
    pub truth: GroundTruth,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Symmetric square root of `D − aaᵀ/g₂`.
fn residual_mixing(d: &[f64], a: &[f64], g2: f64) -> Matrix {
    let m = d.len();
    if a.iter().all(|&x| x == 0.0) {
        return Matrix::from_fn(m, m, |i, j| if i == j { d[i].sqrt() } else { 0.0 });
    }
    let target = SymMatrix::from_fn(m, |i, j| if i == j { d[i] } else { 0.0 } - a[i] * a[j] / g2);
    let eig = symmetric_eigen(&target);
    let roots: Vec<f64> = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    Matrix::from_fn(m, m, |i, j| {
        (0..m)
            .map(|k| eig.vectors[k][i] * roots[k] * eig.vectors[k][j])
            .sum()
    })
}

pub fn generate(spec: &SyntheticEnsembleSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let g2 = spec.signal.g2();
    let mean_y = spec.signal.mean();
    let noise_var = spec.noise_var();
    let eps = spec.epsilon;

    let mut rng = stream(spec.seed, 0);
    let g: Vec<f64> = (0..n)
        .map(|_| spec.signal.sample(&mut rng) - mean_y)
        .collect();
    let mut rng = stream(spec.seed, 1);
    let noise_sd = noise_var.sqrt();
    let labels: Vec<f64> = g
        .iter()
        .map(|gj| mean_y + gj + noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mixing = residual_mixing(&spec.h_variances, &spec.a_values, g2);
    let draws: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut rng = stream(spec.seed, 2 + k as u64);
            (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let mut values = Matrix::zeros(m, n);
    for i in 0..m {
        let lift = spec.a_values[i] / g2;
        let mix = mixing.row(i);
        let row = values.row_mut(i);
        for (j, out) in row.iter_mut().enumerate() {
            let resid: f64 = mix.iter().zip(&draws).map(|(l, z)| l * z[j]).sum();
            let h = lift * g[j] + resid;
            *out = mean_y + g[j] + eps * h;
        }
    }

    let names = (0..m).map(|i| format!("expert{i}")).collect();
    let ids = (0..n).map(|j| format!("s{j}")).collect();
    let predictions = PredictionMatrix::new(names, ids, values)?;

    let truth = GroundTruth {
        g2,
        mean_y,
        var_y: g2 + noise_var,
        noise_var,
        epsilon: eps,
        rho: spec.a_values.iter().map(|a| g2 + eps * a).collect(),
        c_population: population_covariance(g2, &spec.a_values, &spec.h_variances, eps),
        a: spec.a_values.clone(),
        h_variances: spec.h_variances.clone(),
    };
    Ok(SyntheticData {
        predictions,
        labels,
        truth,
    })
}
