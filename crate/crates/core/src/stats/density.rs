//! The stationary count-weighted density of `M` and empirical histograms.

use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use crate::engine::ClassTable;
use crate::error::{Error, Result};
use crate::measure::SplitParameter;

/// Stationary density of `M` over equally weighted sub-branches:
/// `Z'/M^2` on `[Z', 1-Z')`, `1/M^2` on `[1-Z', 1]`, zero below `Z'`.
pub fn stationary_density(m: f64, sp: &SplitParameter) -> Result<f64> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::Domain(format!("M = {m} outside (0, 1]")));
    }
    let zp = sp.z_prime();
    Ok(if m < zp {
        0.0
    } else if m < 1.0 - zp {
        zp / (m * m)
    } else {
        1.0 / (m * m)
    })
}

/// Cumulative distribution of [`stationary_density`], for any real `m`.
pub fn stationary_cdf(m: f64, sp: &SplitParameter) -> f64 {
    let zp = sp.z_prime();
    let hi = 1.0 - zp;
    if m <= zp {
        0.0
    } else if m < hi {
        zp * (1.0 / zp - 1.0 / m)
    } else if m < 1.0 {
        zp * (1.0 / zp - 1.0 / hi) + (1.0 / hi - 1.0 / m)
    } else {
        1.0
    }
}

/// `∫ρ` and `∫Mρ` over `(0, 1]` by composite Gauss–Legendre quadrature.
pub fn stationary_moments_by_quadrature(sp: &SplitParameter) -> (f64, f64) {
    let zp = sp.z_prime();
    let rho = |m: f64| stationary_density(m, sp).unwrap_or(0.0);
    let breaks = [zp, 1.0 - zp];
    let norm = integrate(rho, zp, 1.0, &breaks, 8);
    let mean = integrate(|m| m * rho(m), zp, 1.0, &breaks, 8);
    (norm, mean)
}

/// Count density after the population has grown for `delta` (in units of
/// `tau`) starting from density `rho`, divided by the Malthusian factor
/// `e^delta`.
///
/// Mass at `M` flows to `M e^delta`; mass that crosses the threshold splits
/// into children at `Z` and `1-Z` of its crossing point. `delta` must be
/// short enough that no child crosses again.
pub fn push_forward<F: Fn(f64) -> f64>(rho: &F, sp: &SplitParameter, delta: f64, m: f64) -> f64 {
    let z = sp.z();
    let grow = delta.exp();
    let mut out = 0.0;
    let src = m / grow;
    if src > 0.0 && m <= 1.0 {
        out += rho(src) / grow;
    }
    for share in [z, 1.0 - z] {
        let src = m / (share * grow);
        if src > 1.0 / grow && src <= 1.0 {
            out += rho(src) / (share * grow);
        }
    }
    out / grow
}

/// Largest step for which [`push_forward`] is exact.
pub fn max_push_forward_step(sp: &SplitParameter) -> f64 {
    -(sp.z().max(1.0 - sp.z())).ln()
}

/// Count-weighted histogram of `M` on logarithmic bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    /// Bin edges in `M`, ascending.
    pub edges: Vec<f64>,
    pub weights: Vec<f64>,
    pub normalized: bool,
}

/// Bins per default histogram.
pub const DEFAULT_HISTOGRAM_BINS: usize = 64;

impl DensityHistogram {
    /// Empty histogram with `bins` logarithmic bins over `[lo, hi]`.
    pub fn log_bins(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || bins == 0 {
            return Err(Error::Domain(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let mut edges: Vec<f64> = (0..=bins).map(|i| (a + (b - a) * i as f64 / bins as f64).exp()).collect();
        edges[0] = lo;
        edges[bins] = hi;
        Ok(Self { edges, weights: vec![0.0; bins], normalized: false })
    }

    /// 64 logarithmic bins over `[Z'(1-Z'), 1]`.
    pub fn default_for(sp: &SplitParameter) -> Self {
        let zp = sp.z_prime();
        Self::log_bins(zp * (1.0 - zp), 1.0, DEFAULT_HISTOGRAM_BINS).expect("valid default range")
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    /// Adds `weight` at `m`; values outside the range land in the end bins.
    pub fn add(&mut self, m: f64, weight: f64) {
        let i = self.edges.partition_point(|&e| e <= m).saturating_sub(1).min(self.bins() - 1);
        self.weights[i] += weight;
        self.normalized = false;
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("histogram is empty".into()));
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        self.normalized = true;
        Ok(())
    }

    /// Normalized histogram of `M(t)` over every sub-branch in `table`.
    pub fn from_table(table: &ClassTable, t: f64, template: &DensityHistogram) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Domain("empty class table".into()));
        }
        let mut h = template.clone();
        h.weights.iter_mut().for_each(|w| *w = 0.0);
        let ln_total = table.total_count().ln();
        for (k, n) in table.sorted() {
            let m = table.ln_threshold_quantity(k, t).exp();
            h.add(m, (n.ln() - ln_total).exp());
        }
        h.normalize()?;
        Ok(h)
    }

    /// Empirical CDF at each edge.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.weights.iter().map(|w| {
                acc += w;
                acc
            }))
            .collect()
    }
}

/// Sup-norm distance between the histogram's CDF and the stationary CDF,
/// evaluated at the bin edges.
pub fn density_distance(hist: &DensityHistogram, sp: &SplitParameter) -> Result<f64> {
    if !hist.normalized {
        return Err(Error::Domain("histogram is not normalized".into()));
    }
    let below = stationary_cdf(hist.edges[0], sp);
    Ok(hist
        .edges
        .iter()
        .zip(hist.cdf_at_edges())
        .map(|(&e, f)| (below + f - stationary_cdf(e, sp)).abs())
        .fold(0.0, f64::max))
}
