//! Summaries derived from the rows of a record.
//!
//! A summary depends only on the invocation, the rows and the stored
//! measurements, so re-analysing a saved record reproduces it exactly.

use std::collections::BTreeMap;

use branchsim_core::measure::SplitParameter;
use branchsim_core::scenarios::build_golden;
use branchsim_core::stats::{fit_decay_exponent, fluctuation_envelope, limiting_mean, MeanSeries};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::execute::multiparticle_horizon;
use crate::record::Invocation;

fn column(columns: &[String], name: &str) -> Result<usize> {
    columns
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| CliError::Config(format!("record has no '{name}' column")))
}

fn number(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

/// Envelope key for a window starting at `start` (in units of `tau`).
fn window_key(start: f64) -> String {
    format!("w{start}")
}

pub fn summarize(
    inv: &Invocation,
    columns: &[String],
    rows: &[Vec<Option<f64>>],
    measurements: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, Value>> {
    let mut s: BTreeMap<String, Value> = measurements.iter().map(|(k, &v)| (k.clone(), json!(v))).collect();
    s.insert("samples".into(), json!(rows.len()));
    match inv {
        Invocation::Scenario { .. } => {
            if let Some(last) = rows.last() {
                for (name, v) in columns.iter().zip(last) {
                    let key = if name == "t" { "finalTime".to_string() } else { format!("final{}{}", name[..1].to_uppercase(), &name[1..]) };
                    s.insert(key, number(*v));
                }
            }
        }
        Invocation::Golden { run } => {
            let config = build_golden(run.components, run.layout, run.horizon)?;
            let sp = SplitParameter::from_z(config.z)?;
            let (ti, mi) = (column(columns, "t")?, column(columns, "meanM")?);
            let mut series = MeanSeries::new(config.tau);
            for r in rows {
                if let (Some(t), Some(m)) = (r[ti], r[mi]) {
                    series.push(t, m);
                }
            }
            s.insert("limitingMean".into(), json!(limiting_mean(&sp)));
            for &(a, b) in &run.windows {
                let env = if b <= run.horizon {
                    fluctuation_envelope(&series, &sp, &[(a * config.tau, b * config.tau)]).ok().map(|v| v[0])
                } else {
                    None
                };
                s.insert(window_key(a), number(env));
            }
            let fit = series.restricted(run.fit_range.0 * config.tau, run.fit_range.1.min(run.horizon) * config.tau);
            s.insert("decayExponent".into(), number(fit_decay_exponent(&fit, &sp, run.fit_bins_per_decade).ok()));
        }
        Invocation::Multiparticle { particles, z, tau1, events, .. } => {
            let sp = SplitParameter::from_z(*z)?;
            let ti = column(columns, "t")?;
            let times: Vec<f64> = rows.iter().filter_map(|r| r[ti]).collect();
            let mean = (times.len() >= 2).then(|| (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64);
            let expected = tau1 * limiting_mean(&sp) / f64::from(*particles);
            s.insert("meanInterval".into(), number(mean));
            s.insert("expectedInterval".into(), json!(expected));
            s.insert("relativeError".into(), number(mean.map(|m| m / expected - 1.0)));
            s.insert("horizon".into(), json!(multiparticle_horizon(*particles, &sp, *tau1, *events)));
        }
        Invocation::Regime { .. } => {
            if let [row] = rows {
                for (name, v) in columns.iter().zip(row) {
                    s.insert(name.clone(), number(*v));
                }
            }
        }
    }
    Ok(s)
}
