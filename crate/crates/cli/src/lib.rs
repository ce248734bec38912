//! Command-line front end for the `upcr` estimator.
//!
//! Four subcommands share the CSV formats in [`io`]:
//!
//! * `estimate` fits the unsupervised ensemble and writes a JSON report
//!   (exit code 3 on a Hard verdict);
//! * `predict` applies a fitted model to a prediction matrix;
//! * `simulate` writes a synthetic ensemble with its ground truth;
//! * `eval` compares U-PCR with the baselines when labels are available.

pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod report;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use upcr::{generate, predict, upcr_fit, FittedEnsemble, Loss, Signal, SyntheticEnsembleSpec};

pub use error::{CliError, CliResult};

use config::{resolve, Overrides};
use report::EstimateReport;

#[derive(Debug, Parser)]
#[command(name = "upcr", version, about = "Unsupervised ensemble regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate regressor accuracies and ensemble weights without labels
    Estimate(EstimateArgs),
    /// Apply a fitted model to a prediction matrix
    Predict(PredictArgs),
    /// Generate a synthetic ensemble with known ground truth
    Simulate(SimulateArgs),
    /// Score U-PCR and the baselines against labels
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Mean of the response
    #[arg(long)]
    pub mean_y: Option<f64>,
    /// Variance of the response
    #[arg(long)]
    pub var_y: Option<f64>,
    /// Pairwise loss for the offset fit: squared or absolute
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<Loss>,
    /// Number of q values on the residual grid [default: 201]
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Hard verdict threshold as a fraction of var_y [default: 0.1]
    #[arg(long)]
    pub eps_l: Option<f64>,
    /// JSON file with PipelineConfig fields and optionally mean_y / var_y
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_loss(s: &str) -> Result<Loss, String> {
    s.parse()
}

impl PipelineArgs {
    fn settings(&self) -> CliResult<config::Settings> {
        let o = Overrides {
            mean_y: self.mean_y,
            var_y: self.var_y,
            loss: self.loss,
            grid_points: self.grid_points,
            eps_l: self.eps_l,
        };
        resolve(self.config.as_deref(), &o)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// CSV with a sample_id column and one column per regressor
    #[arg(long)]
    pub predictions: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Report destination; stdout when omitted
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the fitted model on its own
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Fitted model, or an estimate report containing one
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with a sample_id column and one column per regressor
    #[arg(long)]
    pub predictions: PathBuf,
    /// Destination for sample_id,y_hat; stdout when omitted
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalKind {
    Normal,
    Friedman1,
    Friedman2,
    Friedman3,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Full generator spec as JSON; the remaining generator flags are ignored
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of regressors
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Number of samples
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Scale of the regressor deviations
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = SignalKind::Normal)]
    pub signal: SignalKind,
    /// Signal variance for the normal signal
    #[arg(long, default_value_t = 0.5)]
    pub g2: f64,
    /// Signal mean for the normal signal
    #[arg(long, default_value_t = 0.0)]
    pub signal_mean: f64,
    /// Variance of the label noise; defaults depend on the signal
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Comma-separated deviation variances, one per expert
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h_variances: Option<Vec<f64>>,
    /// Comma-separated deviation/response covariances, one per expert
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a_values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving predictions.csv, labels.csv and truth.json
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// CSV with a sample_id column and one column per regressor
    #[arg(long)]
    pub predictions: PathBuf,
    /// CSV with header sample_id,y
    #[arg(long)]
    pub labels: PathBuf,
    /// Response moments default to the label mean and variance
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// CSV table destination; the table is always printed to stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// `estimate` reached the Hard verdict.
    Hard,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::Hard => 3,
        }
    }
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Estimate(a) => estimate(&a),
        Command::Predict(a) => predict_cmd(&a).map(|_| Outcome::Done),
        Command::Simulate(a) => simulate(&a).map(|_| Outcome::Done),
        Command::Eval(a) => eval_cmd(&a).map(|_| Outcome::Done),
    }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> CliResult<()> {
    let mut out = io::output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn estimate(args: &EstimateArgs) -> CliResult<Outcome> {
    let settings = args.pipeline.settings()?;
    let moments = settings.moments()?;
    let preds = io::read_predictions(&args.predictions)?;
    let fit = upcr_fit(&preds, &moments, &settings.pipeline)?;
    let report = EstimateReport::new(&fit, settings.pipeline.loss);
    write_json(args.output.as_deref(), &report)?;
    if let Some(path) = &args.model {
        write_json(Some(path), &fit)?;
    }
    if args.output.is_some() {
        std::io::stdout().write_all(report.summary().as_bytes())?;
    }
    Ok(if fit.is_hard() {
        Outcome::Hard
    } else {
        Outcome::Done
    })
}

/// Reads a model file, accepting a bare model or a report with a `model` field.
pub fn load_model(path: &Path) -> CliResult<FittedEnsemble> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut value: Value = serde_json::from_str(&text).map_err(bad)?;
    let model = match value.get_mut("model") {
        Some(inner) => inner.take(),
        None => value,
    };
    serde_json::from_value(model).map_err(bad)
}

pub fn predict_cmd(args: &PredictArgs) -> CliResult<Vec<f64>> {
    let fit = load_model(&args.model)?;
    let preds = io::read_predictions(&args.predictions)?;
    let y_hat = predict(&fit, &preds)?;
    let out = io::output(args.output.as_deref())?;
    io::write_fitted(out, preds.sample_ids(), &y_hat)?;
    Ok(y_hat)
}

impl SimulateArgs {
    pub fn to_spec(&self) -> CliResult<SyntheticEnsembleSpec> {
        if let Some(path) = &self.spec {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            return serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())));
        }
        let signal = match self.signal {
            SignalKind::Normal => Signal::Normal {
                g2: self.g2,
                mean: self.signal_mean,
            },
            SignalKind::Friedman1 => Signal::Friedman1,
            SignalKind::Friedman2 => Signal::Friedman2,
            SignalKind::Friedman3 => Signal::Friedman3,
        };
        let mut spec = SyntheticEnsembleSpec::new(self.m, self.n, signal, self.epsilon, self.seed);
        if let Some(d) = &self.h_variances {
            spec.h_variances = d.clone();
        }
        if let Some(a) = &self.a_values {
            spec.a_values = a.clone();
        }
        spec.noise_var = self.noise_var;
        Ok(spec)
    }
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec = args.to_spec()?;
    let data = generate(&spec)?;
    fs::create_dir_all(&args.output)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.output.display())))?;
    let dir = &args.output;
    io::write_predictions(
        io::output(Some(&dir.join("predictions.csv")))?,
        &data.predictions,
    )?;
    io::write_labels(
        io::output(Some(&dir.join("labels.csv")))?,
        data.predictions.sample_ids(),
        &data.labels,
    )?;
    write_json(Some(&dir.join("truth.json")), &data.truth)?;
    Ok(())
}

pub fn eval_cmd(args: &EvalArgs) -> CliResult<eval::EvalTable> {
    let settings = args.pipeline.settings()?;
    let preds = io::read_predictions(&args.predictions)?;
    let labels = io::read_labels(&args.labels)?;
    let y = io::align_labels(&preds, &labels)?;
    let moments = match (settings.mean_y, settings.var_y) {
        (None, None) => eval::label_moments(&y)?,
        _ => settings.moments()?,
    };
    let table = eval::compare(&preds, &y, &moments, &settings.pipeline)?;
    if let Some(path) = &args.output {
        table.write_csv(io::output(Some(path))?)?;
    }
    std::io::stdout().write_all(table.pretty().as_bytes())?;
    Ok(table)
}
