//! Bin dynamics when `ln Z / ln(1-Z)` is rational.
//!
//! For a ratio `m/n` in lowest terms every class measure lies on a lattice
//! with spacing `u = |ln(1-Z)|/n = |ln Z|/m`, and the distance of an alive
//! class below threshold falls in one of `k = max(m, n)` bins of width `u`.
//! Over one lattice step every class moves one bin closer to threshold and
//! the front bin fires into bins `m` and `n`, a linear map whose normalized
//! fixed point the engine's occupancies approach.

use serde::Serialize;

use crate::engine::{AggregatedEngine, ClassTable, ComponentInfo};
use crate::error::{Error, Result};
use crate::measure::{BigCount, ClassKey, LogMeasure, RatioClass, SplitParameter, DEFAULT_EXACT_BITS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalBins {
    pub m: u64,
    pub n: u64,
    /// Number of bins, `max(m, n)`.
    pub bins: usize,
    /// Bin width in `ln M`.
    pub bin_width: f64,
    /// Sample times in units of `tau`, at the middle of each lattice step.
    pub times: Vec<f64>,
    /// Count-weighted occupancy of each bin (bin 0 nearest threshold).
    pub occupancies: Vec<Vec<f64>>,
    pub fixed_point: Vec<f64>,
    /// `Z'^{1/k}`: the factor within which the bin structure fixes `<M>`.
    pub mean_ambiguity_bound: f64,
}

impl RationalBins {
    /// Sup-norm distance of the last sample from the fixed point.
    pub fn final_distance(&self) -> f64 {
        self.occupancies.last().map_or(f64::INFINITY, |o| max_abs_diff(o, &self.fixed_point))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Normalized fixed point of the bin-transfer map
/// `c'_q = c_{q+1} + c_1 ([q = m] + [q = n])` (1-based).
pub fn transfer_fixed_point(m: u64, n: u64) -> Vec<f64> {
    let k = m.max(n) as usize;
    let mut c = vec![1.0 / k as f64; k];
    let mut next = vec![0.0; k];
    for _ in 0..100_000 {
        for q in 0..k {
            let shifted = if q + 1 < k { c[q + 1] } else { 0.0 };
            let inj = c[0] * (f64::from(q + 1 == m as usize) + f64::from(q + 1 == n as usize));
            next[q] = shifted + inj;
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let d = max_abs_diff(&c, &next);
        std::mem::swap(&mut c, &mut next);
        if d < 1e-15 {
            break;
        }
    }
    c
}

/// Runs a single component (`m0 = 1`, `g = 1`) to `t_max` (in units of
/// `tau`) and records the bin occupancies once per lattice step.
pub fn rational_bin_occupancy(sp: &SplitParameter, t_max: f64) -> Result<RationalBins> {
    let (m, n) = match sp.ratio_class() {
        RatioClass::Rational { num, den } => (num, den),
        RatioClass::Irrational => {
            return Err(Error::Domain(format!("ln Z / ln(1-Z) = {} is not rational", sp.ratio())))
        }
    };
    let k = m.max(n) as usize;
    let u = -sp.ln_one_minus_z() / n as f64;
    let tau = 1.0;
    let component = ComponentInfo { family: 0, cell_id: 0, m0: LogMeasure::ONE, ln_g: 0.0 };
    let mut table = ClassTable::new(*sp, tau, DEFAULT_EXACT_BITS, vec!["A".into()], vec![component], 0.0);
    table.add(ClassKey::new(0, 0, 0), &BigCount::from_u64(1));
    let mut engine = AggregatedEngine::new(table, 0.0)?;

    let mut times = Vec::new();
    let mut occupancies = Vec::new();
    let mut j = 0u64;
    loop {
        let t = (j as f64 + 0.5) * u * tau;
        if t > t_max {
            break;
        }
        engine.advance_to(t, |_| {})?;
        let table = engine.table();
        let ln_total = table.total_count().ln();
        let mut occ = vec![0.0; k];
        for (key, count) in table.sorted() {
            let d = -table.ln_threshold_quantity(key, t);
            let bin = ((d / u).floor().max(0.0) as usize).min(k - 1);
            occ[bin] += (count.ln() - ln_total).exp();
        }
        times.push(t);
        occupancies.push(occ);
        j += 1;
    }
    Ok(RationalBins {
        m,
        n,
        bins: k,
        bin_width: u,
        times,
        occupancies,
        fixed_point: transfer_fixed_point(m, n),
        mean_ambiguity_bound: sp.z_prime().powf(1.0 / k as f64),
    })
}
