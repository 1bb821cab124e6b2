//! Time series of the mean sub-branch measure and their envelopes.

use serde::{Deserialize, Serialize};

use crate::engine::BatchInfo;
use crate::error::{Error, Result};
use crate::measure::SplitParameter;

use super::limiting_mean;

/// `(t, <M>)` samples in increasing time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSeries {
    pub tau: f64,
    pub samples: Vec<(f64, f64)>,
}

impl MeanSeries {
    pub fn new(tau: f64) -> Self {
        Self { tau, samples: Vec::new() }
    }

    pub fn push(&mut self, t: f64, mean: f64) {
        self.samples.push((t, mean));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn from_points(tau: f64, points: &[SeriesPoint]) -> Self {
        Self { tau, samples: points.iter().map(|p| (p.t, p.mean)).collect() }
    }

    /// Samples with `t_min <= t <= t_max`.
    pub fn restricted(&self, t_min: f64, t_max: f64) -> MeanSeries {
        MeanSeries {
            tau: self.tau,
            samples: self.samples.iter().copied().filter(|&(t, _)| t >= t_min && t <= t_max).collect(),
        }
    }
}

/// Default log-time grid density.
pub const DEFAULT_SAMPLES_PER_DECADE: u32 = 64;

/// A recorded value of `<M>` with the population state at that moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub mean: f64,
    pub alive_classes: u64,
    pub ln_count: f64,
}

#[derive(Debug, Clone, Copy)]
struct Extremes {
    cell: (i64, usize),
    min: SeriesPoint,
    max: SeriesPoint,
}

/// Builds a [`MeanSeries`] from the event-adjacent values of `ln <M>`
/// (just before and just after each batch) and from grid samples.
///
/// Storing every event-adjacent value is impractical for long runs, so
/// values are reduced to their minimum and maximum within each cell of a
/// log-time grid; cells are additionally split at caller-supplied
/// breakpoints so that the extremes inside any window bounded by them are
/// exact.
#[derive(Debug, Clone)]
pub struct MeanSeriesRecorder {
    tau: f64,
    per_decade: f64,
    breakpoints: Vec<f64>,
    current: Option<Extremes>,
    points: Vec<SeriesPoint>,
}

impl MeanSeriesRecorder {
    pub fn new(tau: f64, samples_per_decade: u32, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.sort_by(f64::total_cmp);
        Self {
            tau,
            per_decade: f64::from(samples_per_decade.max(1)),
            breakpoints,
            current: None,
            points: Vec::new(),
        }
    }

    /// Grid times `tau 10^{k/n}` in `[t_min, t_max]`.
    pub fn grid(&self, t_min: f64, t_max: f64) -> Vec<f64> {
        let lo = (self.per_decade * (t_min / self.tau).log10()).ceil() as i64;
        let hi = (self.per_decade * (t_max / self.tau).log10()).floor() as i64;
        (lo..=hi).map(|k| self.tau * 10f64.powf(k as f64 / self.per_decade)).collect()
    }

    fn cell_of(&self, t: f64) -> (i64, usize) {
        let x = (t / self.tau).max(1e-300);
        let k = (self.per_decade * x.log10()).floor() as i64;
        (k, self.breakpoints.partition_point(|&b| b <= t))
    }

    pub fn record(&mut self, p: SeriesPoint) {
        let cell = self.cell_of(p.t);
        match &mut self.current {
            Some(e) if e.cell == cell => {
                if p.mean < e.min.mean {
                    e.min = p;
                }
                if p.mean > e.max.mean {
                    e.max = p;
                }
            }
            _ => {
                self.flush();
                self.current = Some(Extremes { cell, min: p, max: p });
            }
        }
    }

    pub fn on_batch(&mut self, info: &BatchInfo) {
        let alive_classes = info.alive_classes as u64;
        for (ln_mean, ln_count) in [(info.ln_mean_before, info.ln_count_before), (info.ln_mean_after, info.ln_count_after)] {
            self.record(SeriesPoint { t: info.time, mean: ln_mean.exp(), alive_classes, ln_count });
        }
    }

    fn flush(&mut self) {
        if let Some(e) = self.current.take() {
            let (first, second) = if e.min.t <= e.max.t { (e.min, e.max) } else { (e.max, e.min) };
            self.points.push(first);
            if second != first {
                self.points.push(second);
            }
        }
    }

    /// Recorded points in time order.
    pub fn finish(mut self) -> Vec<SeriesPoint> {
        self.flush();
        self.points.sort_by(|x, y| x.t.total_cmp(&y.t));
        self.points
    }
}

/// Largest `|ln <M>(t) - ln H|` inside each window `[t_min, t_max]`, where
/// `H` is the limiting mean.
pub fn fluctuation_envelope(series: &MeanSeries, sp: &SplitParameter, windows: &[(f64, f64)]) -> Result<Vec<f64>> {
    let ln_h = limiting_mean(sp).ln();
    windows
        .iter()
        .map(|&(lo, hi)| {
            series
                .samples
                .iter()
                .filter(|&&(t, _)| t >= lo && t <= hi)
                .map(|&(_, m)| (m.ln() - ln_h).abs())
                .reduce(f64::max)
                .ok_or_else(|| Error::Domain(format!("no samples in window [{lo}, {hi}]")))
        })
        .collect()
}

/// Least-squares slope of `ln |deviation|` against `ln t`, using the largest
/// deviation (and the time at which it occurs) within each of
/// `bins_per_decade` log-time bins per decade.
pub fn fit_decay_exponent(series: &MeanSeries, sp: &SplitParameter, bins_per_decade: u32) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series.samples.iter().copied().filter(|&(t, _)| t > 0.0).collect();
    if pts.len() < 20 {
        return Err(Error::Domain(format!("{} samples; at least 20 are needed", pts.len())));
    }
    let (t0, t1) = (pts[0].0, pts[pts.len() - 1].0);
    if (t1 / t0).log10() < 2.0 {
        return Err(Error::Domain(format!("series spans {:.3} decades; at least 2 are needed", (t1 / t0).log10())));
    }
    let ln_h = limiting_mean(sp).ln();
    let per = f64::from(bins_per_decade.max(1));
    let mut maxima: Vec<(i64, f64, f64)> = Vec::new();
    for &(t, m) in &pts {
        let bin = (per * (t / series.tau).log10()).floor() as i64;
        let dev = (m.ln() - ln_h).abs();
        match maxima.last_mut() {
            Some(last) if last.0 == bin => {
                if dev > last.2 {
                    last.1 = t;
                    last.2 = dev;
                }
            }
            _ => maxima.push((bin, t, dev)),
        }
    }
    let xy: Vec<(f64, f64)> = maxima.iter().filter(|p| p.2 > 0.0).map(|p| (p.1.ln(), p.2.ln())).collect();
    if xy.len() < 2 {
        return Err(Error::Domain("fewer than two non-degenerate envelope maxima".into()));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
