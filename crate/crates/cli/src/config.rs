//! Pipeline settings from a JSON file plus command-line overrides.
//!
//! The file's keys are the `PipelineConfig` field names, optionally joined by
//! `mean_y` and `var_y`.

use std::path::Path;

use serde_json::{Map, Value};
use upcr::{Loss, PipelineConfig, ResponseMoments};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub mean_y: Option<f64>,
    pub var_y: Option<f64>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mean_y: Option<f64>,
    pub var_y: Option<f64>,
    pub loss: Option<Loss>,
    pub grid_points: Option<usize>,
    pub eps_l: Option<f64>,
}

pub fn parse_config(text: &str) -> CliResult<Settings> {
    let bad = |msg: String| CliError::Input(format!("config: {msg}"));
    let Value::Object(mut map) = serde_json::from_str(text).map_err(|e| bad(e.to_string()))? else {
        return Err(bad("expected a JSON object".into()));
    };
    let mut take_number = |key: &str| -> CliResult<Option<f64>> {
        match map.remove(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| bad(format!("`{key}` must be a number"))),
        }
    };
    let mean_y = take_number("mean_y")?;
    let var_y = take_number("var_y")?;

    let known = match serde_json::to_value(PipelineConfig::default()) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    if let Some(key) = map.keys().find(|k| !known.contains_key(*k)) {
        return Err(bad(format!("unknown key `{key}`")));
    }
    let pipeline: PipelineConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| bad(e.to_string()))?;
    Ok(Settings {
        pipeline,
        mean_y,
        var_y,
    })
}

pub fn resolve(config: Option<&Path>, overrides: &Overrides) -> CliResult<Settings> {
    let mut s = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => Settings::default(),
    };
    if let Some(v) = overrides.mean_y {
        s.mean_y = Some(v);
    }
    if let Some(v) = overrides.var_y {
        s.var_y = Some(v);
    }
    if let Some(v) = overrides.loss {
        s.pipeline.loss = v;
    }
    if let Some(v) = overrides.grid_points {
        s.pipeline.grid_points = v;
    }
    if let Some(v) = overrides.eps_l {
        s.pipeline.eps_l = v;
    }
    s.pipeline.validate()?;
    Ok(s)
}

impl Settings {
    /// The response moments, which must be given explicitly.
    pub fn moments(&self) -> CliResult<ResponseMoments> {
        match (self.mean_y, self.var_y) {
            (Some(m), Some(v)) => Ok(ResponseMoments::new(m, v)?),
            _ => Err(CliError::Input(
                "response moments required: pass --mean-y and --var-y or set mean_y/var_y in --config".into(),
            )),
        }
    }
}
