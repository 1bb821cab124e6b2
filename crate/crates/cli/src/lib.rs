//! Command-line front end for `branchsim-core`.
//!
//! Every command produces a [`record::RunRecord`]: the invocation that
//! reproduces it, a table of samples and a summary computed from that table.

pub mod args;
mod error;
mod execute;
pub mod record;
mod summary;
mod units;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use branchsim_core::scenarios::*;
use serde_json::Value;

use args::{Cli, Command, Format, OutputArgs, RegimeArgs, ScenarioOverrides};
pub use error::{CliError, Result};
pub use execute::{execute, Output};
use record::{emit_csv, emit_json, emit_plot_data, read_record, Invocation, RunRecord, TOOL_VERSION};
pub use summary::summarize;

/// Sub-branch cap for the built-in exact scenarios, enough for 20 doublings.
const BUILTIN_POPULATION_CAP: usize = 1 << 23;
const DEFAULT_DOUBLINGS: u32 = 10;

fn apply_overrides(c: &mut ScenarioConfig, o: &ScenarioOverrides) {
    if let Some(m) = o.mode {
        c.mode = m.into();
    }
    if let Some(p) = o.policy {
        c.residual_policy = p.into();
    }
    if let Some(z) = o.z {
        c.z = z;
    }
    if let Some(tau) = o.tau {
        c.tau = tau;
    }
    if let Some(h) = o.horizon {
        c.horizon = h;
    }
    if let Some(cap) = o.population_cap {
        c.population_cap = cap;
    }
    if let Some(t) = o.handoff_threshold {
        c.handoff_threshold = t;
    }
    if let Some(b) = o.exact_bits {
        c.exact_bits = b;
    }
    if let Some(s) = o.seed {
        c.seed = s;
    }
}

/// Sample times `0, step, 2 step, ...` up to the horizon.
fn uniform_samples(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step + 1e-9).floor() as u64;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn doubling_scenario(mut c: ScenarioConfig, doublings: Option<u32>, o: &ScenarioOverrides) -> ScenarioConfig {
    c.population_cap = BUILTIN_POPULATION_CAP;
    apply_overrides(&mut c, o);
    let period = doubling_period(c.tau);
    if o.horizon.is_none() {
        c.horizon = f64::from(doublings.unwrap_or(DEFAULT_DOUBLINGS)) * period;
    }
    c.sample_times = uniform_samples(c.horizon, period);
    c
}

fn regime_invocation(a: &RegimeArgs) -> Invocation {
    let mut params = PhysicalParams::grw_proton();
    if let Some(w) = a.width {
        params.width = w;
    }
    if let Some(r) = a.rate {
        params.rate = r;
    }
    if let Some(m) = a.reference_mass {
        params.reference_mass = m;
    }
    params.rate_scaling = a.scaling.into();
    let masses = match &a.sweep_mass {
        Some(s) => s.0.clone(),
        None => vec![a.mass.unwrap_or(params.mass)],
    };
    params.mass = masses[0];
    Invocation::Regime { params, z: a.z, horizon_factor: a.horizon_factor, masses }
}

fn invocation(command: &Command) -> Result<Invocation> {
    Ok(match command {
        Command::Run { config, overrides } => {
            let text = std::fs::read_to_string(config)?;
            let mut c: ScenarioConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            apply_overrides(&mut c, overrides);
            Invocation::Scenario { config: c }
        }
        Command::Eq5 { doublings, overrides } => {
            Invocation::Scenario { config: doubling_scenario(build_eq5(), *doublings, overrides) }
        }
        Command::Eq6 { doublings, overrides } => {
            Invocation::Scenario { config: doubling_scenario(build_eq6(), *doublings, overrides) }
        }
        Command::Gaussian { cells, periods, overrides } => {
            let mut pair = GaussianPair { cells: (*cells).into(), ..GaussianPair::default() };
            if let Some(z) = overrides.z {
                pair.z = z;
            }
            if let Some(tau) = overrides.tau {
                pair.tau = tau;
            }
            let mut c = build_gaussian_pair(&pair)?;
            apply_overrides(&mut c, overrides);
            let period = doubling_period(c.tau);
            if overrides.horizon.is_none() {
                c.horizon = execute::first_branch_time(&c, 0)? + periods * period;
            }
            c.sample_times = uniform_samples(c.horizon, 0.5 * period);
            Invocation::Scenario { config: c }
        }
        Command::Golden { horizon, samples_per_decade, components, layout } => {
            let mut run = GoldenRun { horizon: *horizon, samples_per_decade: *samples_per_decade, ..GoldenRun::default() };
            if let Some(k) = components {
                run.components = *k;
            }
            if let Some(l) = layout {
                run.layout = (*l).into();
            }
            Invocation::Golden { run }
        }
        Command::Multiparticle { particles, z, tau1, seed, events } => {
            Invocation::Multiparticle { particles: *particles, z: *z, tau1: *tau1, seed: *seed, events: *events }
        }
        Command::Regime(a) => regime_invocation(a),
        Command::Analyze { .. } => unreachable!("analyze has no invocation"),
    })
}

fn threads(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n > 0 { Ok(n) } else { Err(CliError::Usage("--threads must be positive".into())) };
    }
    match std::env::var("BRANCHSIM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("BRANCHSIM_THREADS = '{v}' is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// The configuration echo printed by `--print-config`.
fn resolved_config(inv: &Invocation) -> Result<Value> {
    let mut v = serde_json::to_value(inv).map_err(|e| CliError::Config(e.to_string()))?;
    match inv {
        Invocation::Scenario { config } => {
            config.resolve()?;
        }
        Invocation::Golden { run } => {
            let scenario = build_golden(run.components, run.layout, run.horizon)?;
            scenario.resolve()?;
            v["scenario"] = serde_json::to_value(scenario).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Invocation::Regime { params, .. } => params.validate()?,
        Invocation::Multiparticle { .. } => {}
    }
    Ok(v)
}

fn writer(out: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &out.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json_value<W: Write>(v: &Value, w: &mut W) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, v).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

/// Builds the record of one invocation.
pub fn record_of(inv: Invocation, workers: usize, timing: bool) -> Result<RunRecord> {
    let start = Instant::now();
    let out = execute(&inv, workers)?;
    let wall = start.elapsed().as_secs_f64();
    let summary = summarize(&inv, &out.columns, &out.rows, &out.measurements)?;
    Ok(RunRecord {
        tool_version: TOOL_VERSION.into(),
        engine_mode: inv.engine_mode(),
        seed: inv.seed(),
        invocation: inv,
        wall_time_seconds: timing.then_some(wall),
        columns: out.columns,
        rows: out.rows,
        measurements: out.measurements,
        summary,
    })
}

fn analyze(path: &std::path::Path, rerun: bool, out: &OutputArgs) -> Result<()> {
    let record = read_record(&std::fs::read_to_string(path)?)?;
    let summary = summarize(&record.invocation, &record.columns, &record.rows, &record.measurements)?;
    if summary != record.summary {
        let differing: Vec<&String> = summary
            .keys()
            .chain(record.summary.keys())
            .filter(|k| summary.get(*k) != record.summary.get(*k))
            .collect();
        return Err(CliError::Mismatch(format!("recomputed summary differs in {differing:?}")));
    }
    if rerun {
        let again = execute(&record.invocation, threads(None)?)?;
        if again.columns != record.columns || again.rows != record.rows || again.measurements != record.measurements {
            return Err(CliError::Mismatch("rerun of the recorded invocation produced different output".into()));
        }
    }
    let mut w = writer(out)?;
    write_json_value(&serde_json::to_value(&summary).map_err(|e| CliError::Config(e.to_string()))?, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let out = &cli.output;
    if let Command::Analyze { record, rerun } = &cli.command {
        return analyze(record, *rerun, out);
    }
    let inv = invocation(&cli.command)?;
    let resolved = resolved_config(&inv)?;
    if out.print_config {
        let mut w = writer(out)?;
        write_json_value(&resolved, &mut w)?;
        w.flush()?;
        return Ok(());
    }
    let workers = match &cli.command {
        Command::Regime(a) => threads(a.threads)?,
        _ => 1,
    };
    let record = record_of(inv, workers, out.timing)?;
    let mut w = writer(out)?;
    if out.plot_data {
        emit_plot_data(&record, &mut w)?;
    } else {
        match out.format {
            Format::Csv => emit_csv(&record, &mut w)?,
            Format::Json => emit_json(&record, &mut w)?,
        }
    }
    w.flush()?;
    Ok(())
}
