//! Long run at the golden-ratio split, tracking `<M>` against its limit.

use serde::{Deserialize, Serialize};

use super::builders::{build_golden, InitialLayout};
use super::config::ScenarioConfig;
use crate::engine::{AggregatedEngine, ClassTable};
use crate::error::Result;
use crate::stats::{
    density_distance, fit_decay_exponent, fluctuation_envelope, limiting_mean, DensityHistogram, MeanSeries,
    MeanSeriesRecorder, SeriesPoint, DEFAULT_SAMPLES_PER_DECADE,
};

/// Settings of a golden-ratio run; times are in units of `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRun {
    pub components: u32,
    pub layout: InitialLayout,
    pub horizon: f64,
    pub samples_per_decade: u32,
    /// First log-grid sample time.
    pub grid_start: f64,
    pub windows: Vec<(f64, f64)>,
    /// Time at which the histogram of `M` is compared with the stationary
    /// density.
    pub density_time: f64,
    /// Time range used by the decay fit.
    pub fit_range: (f64, f64),
    pub fit_bins_per_decade: u32,
}

impl Default for GoldenRun {
    fn default() -> Self {
        Self {
            components: 4,
            layout: InitialLayout::LogUniform,
            horizon: 8000.0,
            samples_per_decade: DEFAULT_SAMPLES_PER_DECADE,
            grid_start: 0.1,
            windows: vec![(25.0, 8000.0), (150.0, 8000.0), (4300.0, 8000.0)],
            density_time: 1000.0,
            fit_range: (25.0, 8000.0),
            fit_bins_per_decade: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenReport {
    pub scenario: ScenarioConfig,
    pub limiting_mean: f64,
    pub points: Vec<SeriesPoint>,
    /// One value per window; `None` when the window lies beyond the horizon.
    pub envelopes: Vec<Option<f64>>,
    pub decay_exponent: Option<f64>,
    pub density_distance: Option<f64>,
    pub events: u64,
    pub final_alive_classes: u64,
    pub final_ln_count: f64,
    /// Largest relative drift of the total measure over the grid samples.
    pub max_conservation_drift: f64,
}

impl GoldenReport {
    pub fn series(&self) -> MeanSeries {
        MeanSeries::from_points(self.scenario.tau, &self.points)
    }
}

pub fn run_golden(run: &GoldenRun) -> Result<GoldenReport> {
    let scenario = build_golden(run.components, run.layout, run.horizon)?;
    let resolved = scenario.resolve()?;
    let tau = scenario.tau;
    let sp = resolved.sp;
    let table = ClassTable::from_scenario(&scenario, &resolved)?;
    let mut engine = AggregatedEngine::new(table, 0.0)?;

    let mut edges: Vec<f64> = run.windows.iter().flat_map(|w| [w.0 * tau, w.1 * tau]).collect();
    edges.push(run.density_time * tau);
    let mut recorder = MeanSeriesRecorder::new(tau, run.samples_per_decade, edges.clone());
    let mut stops = recorder.grid(run.grid_start * tau, run.horizon * tau);
    stops.extend(edges.iter().copied().filter(|&t| t > 0.0 && t <= run.horizon * tau));
    stops.push(run.horizon * tau);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut density = None;
    let mut max_drift: f64 = 0.0;
    for &t in &stops {
        engine.advance_to(t, |b| recorder.on_batch(b))?;
        engine.resync_total();
        max_drift = max_drift.max(engine.table().check_conservation()?);
        recorder.record(SeriesPoint {
            t,
            mean: engine.ln_mean_measure(t).exp(),
            alive_classes: engine.table().len() as u64,
            ln_count: engine.ln_total_count(),
        });
        if t == run.density_time * tau {
            let hist = DensityHistogram::from_table(engine.table(), t, &DensityHistogram::default_for(&sp))?;
            density = Some(density_distance(&hist, &sp)?);
        }
    }
    let points = recorder.finish();
    let series = MeanSeries::from_points(tau, &points);
    let envelopes = run
        .windows
        .iter()
        .map(|w| {
            (w.1 <= run.horizon)
                .then(|| fluctuation_envelope(&series, &sp, &[(w.0 * tau, w.1 * tau)]).map(|v| v[0]))
                .transpose()
        })
        .collect::<Result<Vec<_>>>()?;
    let fit_series = series.restricted(run.fit_range.0 * tau, run.fit_range.1.min(run.horizon) * tau);
    let decay_exponent = fit_decay_exponent(&fit_series, &sp, run.fit_bins_per_decade).ok();
    Ok(GoldenReport {
        limiting_mean: limiting_mean(&sp),
        events: engine.events_processed(),
        final_alive_classes: engine.table().len() as u64,
        final_ln_count: engine.ln_total_count(),
        max_conservation_drift: max_drift,
        scenario,
        points,
        envelopes,
        decay_exponent,
        density_distance: density,
    })
}
