//! CSV and JSON result files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::engine::{ExperimentResult, ResultRow};
use crate::error::{Result, SucrError};

pub const CSV_HEADER: &str =
    "sweep_value,pa_used,p_resolved,p_false_positive,p_false_negative,ci_halfwidth,trials_effective";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = SucrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(SucrError::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// JSON document: the rows plus everything needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
}

impl ResultDocument {
    pub fn new(result: &ExperimentResult, config: &ExperimentConfig) -> Self {
        ResultDocument {
            seed: config.seed,
            config: config.clone(),
            rows: result.rows.clone(),
        }
    }

    pub fn result(&self) -> ExperimentResult {
        ExperimentResult {
            rows: self.rows.clone(),
        }
    }
}

/// CSV text. Floats use Rust's shortest round-trip form; a missing `pa_used`
/// is an empty field.
pub fn to_csv_string(result: &ExperimentResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        let pa = r.pa_used.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.sweep_value,
            pa,
            r.p_resolved,
            r.p_false_positive,
            r.p_false_negative,
            r.ci_halfwidth,
            r.trials_effective
        );
    }
    out
}

pub fn to_json_string(result: &ExperimentResult, config: &ExperimentConfig) -> Result<String> {
    serde_json::to_string_pretty(&ResultDocument::new(result, config))
        .map_err(|e| SucrError::Serialization(e.to_string()))
}

pub fn emit_results(
    result: &ExperimentResult,
    config: &ExperimentConfig,
    path: &Path,
    format: OutputFormat,
) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv_string(result),
        OutputFormat::Json => to_json_string(result, config)? + "\n",
    };
    fs::write(path, text).map_err(|source| SucrError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json(path: &Path) -> Result<ResultDocument> {
    let text = fs::read_to_string(path).map_err(|source| SucrError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| SucrError::Serialization(format!("{}: {e}", path.display())))
}
