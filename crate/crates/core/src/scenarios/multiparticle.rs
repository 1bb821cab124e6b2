//! Merged branching events of many independent particles.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::SplitParameter;
use crate::stats::limiting_mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiparticleStream {
    /// Event times, non-decreasing.
    pub times: Vec<f64>,
    /// Particle that branched at each event.
    pub particles: Vec<u32>,
    /// Mean spacing of consecutive events, if there are at least two.
    pub mean_interval: Option<f64>,
}

/// Time order with the particle index as tie-breaker.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Clock(f64, u32);

impl Eq for Clock {}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Clock {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// `n` independent particles, each followed along one sub-branch lineage.
///
/// A lineage at `ln M` branches when `ln M` reaches zero and continues in
/// the `Z` child (interval `tau1 |ln Z|`) with probability `Z`, otherwise in
/// the `1-Z` child. Initial phases are drawn from the equilibrium of that
/// renewal process, which for `z = 1/2` is uniform on `(-ln 2, 0]`.
pub fn multiparticle_stream(n: u32, sp: &SplitParameter, tau1: f64, seed: u64, horizon: f64) -> Result<MultiparticleStream> {
    if n == 0 {
        return Err(Error::Domain("at least one particle is needed".into()));
    }
    if !(tau1 > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Domain(format!("tau1 = {tau1} and horizon = {horizon} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = sp.z();
    let (step_z, step_r) = (-sp.ln_z(), -sp.ln_one_minus_z());
    // Length-biased choice of the cycle the particle is currently in.
    let p_z = z * step_z / limiting_mean(sp);

    let mut heap = BinaryHeap::with_capacity(n as usize);
    for i in 0..n {
        let cycle = if rng.gen::<f64>() < p_z { step_z } else { step_r };
        // 1 - U lies in (0, 1], so the phase lies in (-cycle, 0].
        let phase = -cycle * (1.0 - rng.gen::<f64>());
        heap.push(Reverse(Clock(-tau1 * phase, i)));
    }
    let mut times = Vec::new();
    let mut particles = Vec::new();
    while let Some(Reverse(Clock(t, i))) = heap.pop() {
        if t > horizon {
            break;
        }
        times.push(t);
        particles.push(i);
        let step = if rng.gen::<f64>() < z { step_z } else { step_r };
        heap.push(Reverse(Clock(t + tau1 * step, i)));
    }
    let mean_interval = (times.len() >= 2).then(|| (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64);
    Ok(MultiparticleStream { times, particles, mean_interval })
}
