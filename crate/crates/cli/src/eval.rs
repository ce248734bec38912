//! Labeled comparison of U-PCR against the baselines.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;
use upcr::baselines::{
    debiased_expert, ensemble_mean, ensemble_median, evaluate, gem_predict, gem_weights,
    linear_combination, misfit_covariance, oracle_weights, DifficultyBand, Evaluation,
};
use upcr::estimator::center_predictions;
use upcr::{predict, upcr_fit, PipelineConfig, PredictionMatrix, ResponseMoments};

use crate::error::CliResult;
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub method: &'static str,
    pub score: Option<Evaluation>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    /// Band of the oracle's normalized MSE.
    pub oracle_band: DifficultyBand,
}

impl EvalTable {
    pub fn get(&self, method: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn normalized(&self, method: &str) -> Option<f64> {
        self.get(method)
            .and_then(|r| r.score)
            .map(|s| s.normalized_mse)
    }

    pub fn write_csv(&self, out: impl Write) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "mse", "normalized_mse", "band", "note"])
            .map_err(io::csv_error)?;
        for r in &self.rows {
            let (mse, nmse, band) = match r.score {
                Some(s) => (
                    s.mse.to_string(),
                    s.normalized_mse.to_string(),
                    s.band.to_string(),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([r.method, &mse, &nmse, &band, &r.note])
                .map_err(io::csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn pretty(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22}  {:>12}  {:>14}  {:<11}  note",
            "method", "mse", "normalized_mse", "band"
        );
        for r in &self.rows {
            match r.score {
                Some(e) => {
                    let _ = writeln!(
                        s,
                        "{:<22}  {:>12.6}  {:>14.6}  {:<11}  {}",
                        r.method, e.mse, e.normalized_mse, e.band, r.note
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "{:<22}  {:>12}  {:>14}  {:<11}  {}",
                        r.method, "-", "-", "-", r.note
                    );
                }
            }
        }
        let _ = writeln!(s, "oracle difficulty band: {}", self.oracle_band);
        s
    }
}

fn row(method: &'static str, score: Evaluation, note: impl Into<String>) -> EvalRow {
    EvalRow {
        method,
        score: Some(score),
        note: note.into(),
    }
}

fn missing(method: &'static str, note: impl Into<String>) -> EvalRow {
    EvalRow {
        method,
        score: None,
        note: note.into(),
    }
}

/// Sample mean and (population) variance of the labels.
pub fn label_moments(y: &[f64]) -> CliResult<ResponseMoments> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(ResponseMoments::new(mean, var)?)
}

pub fn compare(
    preds: &PredictionMatrix,
    y: &[f64],
    moments: &ResponseMoments,
    cfg: &PipelineConfig,
) -> CliResult<EvalTable> {
    let names = preds.regressor_names();
    let mut rows = Vec::new();

    let fit = if preds.num_regressors() >= 3 {
        Some(upcr_fit(preds, moments, cfg))
    } else {
        None
    };
    rows.push(match &fit {
        None => missing("upcr", "needs at least 3 regressors"),
        Some(Err(e)) => missing("upcr", e.to_string()),
        Some(Ok(f)) if f.is_hard() => missing("upcr", "hard verdict, no ensemble built"),
        Some(Ok(f)) => row("upcr", evaluate(&predict(f, preds)?, y, moments)?, ""),
    });
    rows.push(row(
        "mean",
        evaluate(&ensemble_mean(preds), y, moments)?,
        "",
    ));
    rows.push(row(
        "median",
        evaluate(&ensemble_median(preds), y, moments)?,
        "",
    ));

    let z = center_predictions(preds, moments)?.z;
    let oracle = oracle_weights(&z, y, moments)?;
    let oracle_score = evaluate(
        &linear_combination(&z, &oracle.weights, moments.mean_y),
        y,
        moments,
    )?;
    let note = if oracle.rank_deficient {
        "minimum-norm weights"
    } else {
        ""
    };
    rows.push(row("oracle", oracle_score, note));

    let singles = (0..preds.num_regressors())
        .map(|i| evaluate(&debiased_expert(preds, i, moments), y, moments))
        .collect::<Result<Vec<_>, _>>()?;
    let best = (0..singles.len())
        .min_by(|&a, &b| singles[a].mse.total_cmp(&singles[b].mse))
        .unwrap_or(0);
    rows.push(row("best_single", singles[best], names[best].clone()));

    match &fit {
        Some(Ok(f)) => {
            let est = (0..names.len())
                .min_by(|&a, &b| f.mse_estimates[a].total_cmp(&f.mse_estimates[b]))
                .unwrap_or(0);
            rows.push(row(
                "estimated_best_single",
                singles[est],
                names[est].clone(),
            ));
            let top = (0..names.len())
                .max_by(|&a, &b| f.initial.rho_hat[a].total_cmp(&f.initial.rho_hat[b]))
                .unwrap_or(0);
            rows.push(row("argmax_rho_single", singles[top], names[top].clone()));
        }
        _ => {
            rows.push(missing(
                "estimated_best_single",
                "no unsupervised estimates",
            ));
            rows.push(missing("argmax_rho_single", "no unsupervised estimates"));
        }
    }

    let gem = misfit_covariance(preds, y).and_then(|c| gem_weights(&c));
    rows.push(match gem {
        Ok(w) => row("gem", evaluate(&gem_predict(preds, &w), y, moments)?, ""),
        Err(e) => missing("gem", e.to_string()),
    });

    Ok(EvalTable {
        rows,
        oracle_band: oracle_score.band,
    })
}
