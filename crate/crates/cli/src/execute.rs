//! Running an invocation to rows of samples.

use std::collections::BTreeMap;

use branchsim_core::engine::{run_aggregated, run_exact, run_hybrid, ClassTable, SubBranch};
use branchsim_core::measure::{logsumexp_accumulate, BigCount, SplitParameter};
use branchsim_core::scenarios::*;
use branchsim_core::stats::limiting_mean;
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::record::Invocation;

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub measurements: BTreeMap<String, f64>,
}

/// Column name of a family's count.
pub fn count_column(family: &str) -> String {
    format!("count{family}")
}

pub fn execute(inv: &Invocation, threads: usize) -> Result<Output> {
    match inv {
        Invocation::Scenario { config } => scenario(config),
        Invocation::Golden { run } => golden(run),
        Invocation::Multiparticle { particles, z, tau1, seed, events } => {
            multiparticle(*particles, *z, *tau1, *seed, *events)
        }
        Invocation::Regime { params, z, horizon_factor, masses } => regime(params, *z, *horizon_factor, masses, threads),
    }
}

fn count_row(t: f64, families: &[String], counts: &BTreeMap<String, BigCount>, residual: u64) -> Vec<Option<f64>> {
    let mut row = vec![Some(t)];
    let values: Vec<f64> = families.iter().map(|f| counts.get(f).map_or(0.0, |c| c.to_ext().to_f64())).collect();
    row.extend(values.iter().map(|&v| Some(v)));
    row.push(Some(residual as f64));
    if families.len() == 2 {
        row.push((values[1] > 0.0).then(|| values[0] / values[1]));
    }
    row
}

fn scenario(config: &ScenarioConfig) -> Result<Output> {
    let resolved = config.resolve()?;
    let families = resolved.families.clone();
    let mut columns = vec!["t".to_string()];
    columns.extend(families.iter().map(|f| count_column(f)));
    columns.push("residualCount".into());
    if families.len() == 2 {
        columns.push("ratio".into());
    }
    let times = config.effective_sample_times();
    let mut rows = Vec::new();
    let mut measurements = BTreeMap::new();
    let mut drift: f64 = 0.0;
    let events;
    match config.mode {
        EngineMode::Exact => {
            let run = run_exact(config, config.horizon, &times)?;
            for (i, snap) in run.snapshots.iter().enumerate() {
                let tally = branchsim_core::engine::OutcomeTally::of(snap, &run.scenario);
                rows.push(count_row(snap.time, &families, &run.outcome_counts(i, config.residual_policy), tally.residual));
                let ln_total = logsumexp_accumulate(
                    snap.sub_branches.iter().flat_map(|s| s.pieces.iter()).map(|p| SubBranch::piece_measure(p, &run.scenario).0),
                );
                drift = drift.max(ln_total.exp_m1().abs());
            }
            events = run.snapshots.last().map_or(0, |s| s.events_processed);
        }
        EngineMode::Aggregated => {
            let samples = run_aggregated(config, config.horizon, &times)?;
            for s in &samples {
                rows.push(count_row(s.time, &families, &s.table.family_counts(), 0));
                drift = drift.max(s.table.check_conservation()?);
            }
            events = samples.last().map_or(0, |s| s.events_processed);
        }
        EngineMode::Hybrid => {
            let run = run_hybrid(config, config.horizon, &times)?;
            for s in &run.samples {
                rows.push(count_row(s.time, &families, &s.table.family_counts(), 0));
                drift = drift.max(s.table.check_conservation()?);
            }
            events = run.samples.last().map_or(0, |s| s.events_processed);
            if let Some(t) = run.handoff_time {
                measurements.insert("handoffTime".into(), t);
            }
        }
    }
    measurements.insert("events".into(), events as f64);
    measurements.insert("maxConservationDrift".into(), drift);
    Ok(Output { columns, rows, measurements })
}

/// Time of the first branching of family `family` in an aggregated scenario.
pub fn first_branch_time(config: &ScenarioConfig, family: u32) -> Result<f64> {
    let resolved = config.resolve()?;
    let table = ClassTable::from_scenario(config, &resolved)?;
    Ok(table
        .iter()
        .filter(|(k, _)| table.components()[k.component as usize].family == family)
        .map(|(k, _)| table.branch_time(*k))
        .fold(f64::INFINITY, f64::min))
}

pub const GOLDEN_COLUMNS: [&str; 5] = ["t", "meanM", "lnDeviation", "aliveClasses", "totalLogCount"];

fn golden(run: &GoldenRun) -> Result<Output> {
    let report = run_golden(run)?;
    let h = report.limiting_mean;
    let rows = report
        .points
        .iter()
        .map(|p| {
            vec![Some(p.t), Some(p.mean), Some((p.mean / h).ln()), Some(p.alive_classes as f64), Some(p.ln_count)]
        })
        .collect();
    let mut measurements = BTreeMap::new();
    if let Some(d) = report.density_distance {
        measurements.insert("densityDistance".into(), d);
    }
    measurements.insert("events".into(), report.events as f64);
    measurements.insert("finalAliveClasses".into(), report.final_alive_classes as f64);
    measurements.insert("maxConservationDrift".into(), report.max_conservation_drift);
    Ok(Output { columns: GOLDEN_COLUMNS.iter().map(|s| s.to_string()).collect(), rows, measurements })
}

/// Horizon at which `n` particles produce about `events` branchings.
pub fn multiparticle_horizon(n: u32, sp: &SplitParameter, tau1: f64, events: u64) -> f64 {
    events as f64 * tau1 * limiting_mean(sp) / f64::from(n)
}

fn multiparticle(n: u32, z: f64, tau1: f64, seed: u64, events: u64) -> Result<Output> {
    let sp = SplitParameter::from_z(z)?;
    let stream = multiparticle_stream(n, &sp, tau1, seed, multiparticle_horizon(n, &sp, tau1, events))?;
    let rows = stream.times.iter().zip(&stream.particles).map(|(&t, &p)| vec![Some(t), Some(f64::from(p))]).collect();
    Ok(Output { columns: vec!["t".into(), "particle".into()], rows, measurements: BTreeMap::new() })
}

pub const REGIME_COLUMNS: [&str; 9] = [
    "massGrams",
    "t0",
    "tau",
    "nextBranchTime",
    "delayFactor",
    "logDelayFactor",
    "cellsCovered",
    "branchInterval",
    "curvatureRatio",
];

fn regime_row(params: &PhysicalParams, sp: &SplitParameter, horizon_factor: f64, mass: f64) -> Result<Vec<Option<f64>>> {
    let p = PhysicalParams { mass, ..*params };
    let d = spreading_delay(&p, horizon_factor)?;
    let interval = branch_interval(&p, sp)?;
    Ok(vec![
        Some(mass * 1e3),
        Some(d.t0),
        Some(p.tau()),
        d.next_branch_time,
        d.delay_factor,
        Some(d.log_delay_factor),
        Some(d.cells_covered),
        Some(interval),
        Some(condition8_gaussian(interval, d.t0)?),
    ])
}

fn regime(params: &PhysicalParams, z: f64, horizon_factor: f64, masses: &[f64], threads: usize) -> Result<Output> {
    params.validate()?;
    let sp = SplitParameter::from_z(z)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} workers: {e}")))?;
    // Indexed parallel collection keeps rows in parameter order.
    let rows = pool.install(|| {
        masses.par_iter().map(|&m| regime_row(params, &sp, horizon_factor, m)).collect::<Result<Vec<_>>>()
    })?;
    let mut measurements = BTreeMap::new();
    for (name, scaling) in [
        ("massThresholdFixedRateGrams", RateScaling::MassIndependent),
        ("massThresholdScaledRateGrams", RateScaling::ProportionalToMass),
    ] {
        let p = PhysicalParams { rate_scaling: scaling, ..*params };
        measurements.insert(name.into(), mass_threshold(&p)? * 1e3);
    }
    Ok(Output { columns: REGIME_COLUMNS.iter().map(|s| s.to_string()).collect(), rows, measurements })
}
