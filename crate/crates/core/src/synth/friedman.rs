//! Friedman #1–#3 benchmark functions and their population moments.
//!
//! Means and variances are integrated with composite Gauss–Legendre rules.
//! Panels are graded toward the lower ends of `x1` and `x3`, where #2 and #3
//! change fastest.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;

/// Friedman #1 on `x ∈ [0, 1]⁵`.
pub fn friedman1(x: &[f64; 5]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// Friedman #2: impedance magnitude.
pub fn friedman2(x: &[f64; 4]) -> f64 {
    let reactance = x[1] * x[2] - 1.0 / (x[1] * x[3]);
    (x[0] * x[0] + reactance * reactance).sqrt()
}

/// Friedman #3: impedance phase.
pub fn friedman3(x: &[f64; 4]) -> f64 {
    ((x[1] * x[2] - 1.0 / (x[1] * x[3])) / x[0]).atan()
}

/// Input box shared by #2 and #3.
pub const FRIEDMAN23_BOX: [(f64, f64); 4] = [
    (0.0, 100.0),
    (40.0 * PI, 560.0 * PI),
    (0.0, 1.0),
    (1.0, 11.0),
];

pub fn sample_friedman1_input<R: Rng + ?Sized>(rng: &mut R) -> [f64; 5] {
    std::array::from_fn(|_| rng.random::<f64>())
}

pub fn sample_friedman23_input<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    std::array::from_fn(|k| {
        let (lo, hi) = FRIEDMAN23_BOX[k];
        lo + (hi - lo) * rng.random::<f64>()
    })
}

/// Population mean and variance of a benchmark function under its uniform
/// input distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

pub fn friedman1_moments() -> Moments {
    static CACHE: OnceLock<Moments> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let rule = composite_rule(0.0, 1.0, &[0.0, 0.25, 0.5, 0.75, 1.0], 16);
        let (mut s1, mut s2) = (0.0, 0.0);
        for &(u, wu) in &rule {
            for &(v, wv) in &rule {
                let s = (PI * u * v).sin();
                s1 += wu * wv * s;
                s2 += wu * wv * s * s;
            }
        }
        // The remaining terms are independent of the sine and of each other:
        // Var(20(x−½)²) = 400/180, Var(10x) = 100/12, Var(5x) = 25/12.
        Moments {
            mean: 10.0 * s1 + 20.0 / 12.0 + 5.0 + 2.5,
            variance: 100.0 * (s2 - s1 * s1) + 400.0 / 180.0 + 100.0 / 12.0 + 25.0 / 12.0,
        }
    })
}

pub fn friedman2_moments() -> Moments {
    static CACHE: OnceLock<Moments> = OnceLock::new();
    *CACHE.get_or_init(|| box_moments(friedman2))
}

pub fn friedman3_moments() -> Moments {
    static CACHE: OnceLock<Moments> = OnceLock::new();
    *CACHE.get_or_init(|| box_moments(friedman3))
}

const GRADED: [f64; 8] = [0.0, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5, 1.0];
const EVEN: [f64; 3] = [0.0, 0.5, 1.0];

fn box_moments(f: fn(&[f64; 4]) -> f64) -> Moments {
    let axis = |k: usize, edges: &[f64]| {
        let (lo, hi) = FRIEDMAN23_BOX[k];
        composite_rule(lo, hi, edges, 10)
    };
    let rules = [
        axis(0, &GRADED),
        axis(1, &EVEN),
        axis(2, &GRADED),
        axis(3, &EVEN),
    ];
    let volume: f64 = FRIEDMAN23_BOX.iter().map(|(lo, hi)| hi - lo).product();
    let (mut s1, mut s2) = (0.0, 0.0);
    for &(x0, w0) in &rules[0] {
        for &(x1, w1) in &rules[1] {
            for &(x2, w2) in &rules[2] {
                for &(x3, w3) in &rules[3] {
                    let w = w0 * w1 * w2 * w3;
                    let v = f(&[x0, x1, x2, x3]);
                    s1 += w * v;
                    s2 += w * v * v;
                }
            }
        }
    }
    let mean = s1 / volume;
    Moments {
        mean,
        variance: s2 / volume - mean * mean,
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

/// Composite rule on `[lo, hi]`; `edges` are panel boundaries as fractions
/// of the interval.
fn composite_rule(lo: f64, hi: f64, edges: &[f64], nodes: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(nodes);
    let width = hi - lo;
    edges
        .windows(2)
        .flat_map(|e| {
            let (a, b) = (lo + width * e[0], lo + width * e[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            base.iter().map(move |&(x, w)| (mid + half * x, half * w))
        })
        .collect()
}
