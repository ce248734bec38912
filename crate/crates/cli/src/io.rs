//! CSV formats.
//!
//! Predictions: header `sample_id,<name_1>,…,<name_m>`, one row per sample.
//! Labels: header `sample_id,y`. Fitted outputs: header `sample_id,y_hat`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use upcr::{Matrix, PredictionMatrix};

use crate::error::{CliError, CliResult};

struct Table {
    columns: Vec<String>,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let shown = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{shown}: {e}")))?
        .clone();
    if header.len() < 2 || &header[0] != "sample_id" {
        return Err(CliError::Input(format!(
            "{shown}: header must be `sample_id,<column>,…`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(columns.len());
        for (k, field) in record.iter().enumerate().skip(1) {
            let value: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "{shown}: line {line}, column {} (`{}`): cannot parse `{field}` as a number",
                    k + 1,
                    columns[k - 1]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Input(format!(
                    "{shown}: line {line}, column {} (`{}`): value `{field}` is not finite",
                    k + 1,
                    columns[k - 1]
                )));
            }
            row.push(value);
        }
        ids.push(record[0].to_owned());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{shown}: no data rows")));
    }
    Ok(Table { columns, ids, rows })
}

pub fn read_predictions(path: &Path) -> CliResult<PredictionMatrix> {
    let t = read_table(path)?;
    let values = Matrix::from_fn(t.columns.len(), t.rows.len(), |i, j| t.rows[j][i]);
    PredictionMatrix::new(t.columns, t.ids, values)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

pub fn read_labels(path: &Path) -> CliResult<Labels> {
    let t = read_table(path)?;
    if t.columns != ["y"] {
        return Err(CliError::Input(format!(
            "{}: header must be `sample_id,y`",
            path.display()
        )));
    }
    Ok(Labels {
        ids: t.ids,
        values: t.rows.into_iter().map(|r| r[0]).collect(),
    })
}

/// Reorders labels to the prediction matrix's sample order.
pub fn align_labels(preds: &PredictionMatrix, labels: &Labels) -> CliResult<Vec<f64>> {
    if labels.ids.len() != preds.num_samples() {
        return Err(CliError::Input(format!(
            "{} labels for {} prediction samples",
            labels.ids.len(),
            preds.num_samples()
        )));
    }
    let mut by_id = HashMap::with_capacity(labels.ids.len());
    for (id, &y) in labels.ids.iter().zip(&labels.values) {
        if by_id.insert(id.as_str(), y).is_some() {
            return Err(CliError::Input(format!("duplicate label sample id `{id}`")));
        }
    }
    preds
        .sample_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::Input(format!("no label for sample id `{id}`")))
        })
        .collect()
}

/// A file when a path is given, stdout otherwise.
pub fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            File::create(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub(crate) fn csv_error(e: csv::Error) -> CliError {
    if let csv::ErrorKind::Io(io) = e.kind() {
        if io.kind() == io::ErrorKind::BrokenPipe {
            return CliError::ClosedOutput;
        }
    }
    CliError::Input(e.to_string())
}

fn write_columns(
    out: impl Write,
    header: &[&str],
    ids: &[String],
    columns: &[&[f64]],
) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    let mut record = Vec::with_capacity(columns.len() + 1);
    for (j, id) in ids.iter().enumerate() {
        record.clear();
        record.push(id.clone());
        // `Display` for f64 prints the shortest string that round-trips.
        record.extend(columns.iter().map(|c| c[j].to_string()));
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions(out: impl Write, preds: &PredictionMatrix) -> CliResult<()> {
    let mut header = vec!["sample_id"];
    header.extend(preds.regressor_names().iter().map(String::as_str));
    let columns: Vec<&[f64]> = (0..preds.num_regressors())
        .map(|i| preds.regressor(i))
        .collect();
    write_columns(out, &header, preds.sample_ids(), &columns)
}

pub fn write_labels(out: impl Write, ids: &[String], y: &[f64]) -> CliResult<()> {
    write_columns(out, &["sample_id", "y"], ids, &[y])
}

pub fn write_fitted(out: impl Write, ids: &[String], y_hat: &[f64]) -> CliResult<()> {
    write_columns(out, &["sample_id", "y_hat"], ids, &[y_hat])
}
