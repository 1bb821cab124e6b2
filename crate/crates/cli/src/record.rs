//! Run records and their serialized forms.

use std::collections::BTreeMap;
use std::io::Write;

use branchsim_core::scenarios::{EngineMode, GoldenRun, PhysicalParams, ScenarioConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    /// A scenario run by one of the engines, sampled at its sample times.
    Scenario { config: ScenarioConfig },
    Golden { run: GoldenRun },
    Multiparticle { particles: u32, z: f64, tau1: f64, seed: u64, events: u64 },
    /// Closed-form estimates at each mass in `masses` (kg).
    Regime { params: PhysicalParams, z: f64, horizon_factor: f64, masses: Vec<f64> },
}

impl Invocation {
    pub fn engine_mode(&self) -> Option<EngineMode> {
        match self {
            Invocation::Scenario { config } => Some(config.mode),
            Invocation::Golden { .. } => Some(EngineMode::Aggregated),
            _ => None,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Invocation::Scenario { config } => config.seed,
            Invocation::Multiparticle { seed, .. } => *seed,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub invocation: Invocation,
    pub engine_mode: Option<EngineMode>,
    pub seed: u64,
    /// Present only when timing was requested, so that records of identical
    /// runs stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    pub columns: Vec<String>,
    /// One entry per column; `None` where a value is undefined.
    pub rows: Vec<Vec<Option<f64>>>,
    /// Scalar results not recoverable from the rows.
    pub measurements: BTreeMap<String, f64>,
    pub summary: BTreeMap<String, Value>,
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn csv_cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.16e}"))
}

/// Header row and samples, comma-separated, 17 significant digits.
pub fn emit_csv<W: Write>(record: &RunRecord, out: &mut W) -> Result<()> {
    writeln!(out, "{}", record.columns.join(","))?;
    for row in &record.rows {
        let cells: Vec<String> = row.iter().map(|&v| csv_cell(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// The whole record as pretty JSON with keys in sorted order.
pub fn emit_json<W: Write>(record: &RunRecord, out: &mut W) -> Result<()> {
    let value = serde_json::to_value(record).map_err(|e| CliError::Mismatch(e.to_string()))?;
    serde_json::to_writer_pretty(&mut *out, &value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

/// Whitespace-separated table with `#` comment lines, readable by gnuplot.
pub fn emit_plot_data<W: Write>(record: &RunRecord, out: &mut W) -> Result<()> {
    for (k, v) in &record.summary {
        writeln!(out, "# {k} = {v}")?;
    }
    writeln!(out, "# {}", record.columns.join(" "))?;
    for row in &record.rows {
        let cells: Vec<String> = row.iter().map(|v| v.map_or("NaN".into(), |x| format!("{x:.16e}"))).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

pub fn read_record(text: &str) -> Result<RunRecord> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("not a run record: {e}")))
}
