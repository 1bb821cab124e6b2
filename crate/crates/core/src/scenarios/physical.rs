//! Closed-form regime estimates for a localized particle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::SplitParameter;
use crate::stats::limiting_mean;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Proton mass, kg.
pub const PROTON_MASS: f64 = 1.672_621_92e-27;
/// Single-particle branching rate of the stochastic-collapse parameters, 1/s.
pub const GRW_RATE: f64 = 1e-16;
/// Localization width of the stochastic-collapse parameters, m (1e-5 cm).
pub const GRW_WIDTH: f64 = 1e-7;

/// How the branching rate depends on mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateScaling {
    MassIndependent,
    /// `1/tau = (m / reference_mass) / tau_1`.
    ProportionalToMass,
}

/// Physical parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub width: f64,
    /// `1/tau_1` at the reference mass.
    pub rate: f64,
    pub hbar: f64,
    pub rate_scaling: RateScaling,
    /// Mass at which the rate equals `rate` under proportional scaling.
    pub reference_mass: f64,
    pub epsilon: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::grw_proton()
    }
}

impl PhysicalParams {
    pub fn grw_proton() -> Self {
        Self {
            mass: PROTON_MASS,
            width: GRW_WIDTH,
            rate: GRW_RATE,
            hbar: HBAR,
            rate_scaling: RateScaling::MassIndependent,
            reference_mass: PROTON_MASS,
            epsilon: 1e-45,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("width", self.width),
            ("rate", self.rate),
            ("hbar", self.hbar),
            ("reference_mass", self.reference_mass),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn tau1(&self) -> f64 {
        1.0 / self.rate
    }

    /// Branching time scale `tau` at `self.mass`.
    pub fn tau(&self) -> f64 {
        match self.rate_scaling {
            RateScaling::MassIndependent => self.tau1(),
            RateScaling::ProportionalToMass => self.tau1() * self.reference_mass / self.mass,
        }
    }

    /// Spreading time `w^2 m / hbar`.
    pub fn t0(&self) -> f64 {
        self.width * self.width * self.mass / self.hbar
    }
}

/// Outcome of [`spreading_delay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadingDelay {
    pub t0: f64,
    /// Root of `M(t) = 1`, absent when there is none before the horizon.
    pub next_branch_time: Option<f64>,
    /// `next_branch_time / tau_1`.
    pub delay_factor: Option<f64>,
    /// The asymptotic estimate `3 ln(tau_1 / t0)`.
    pub log_delay_factor: f64,
    /// `(tau_1 / t0)^3`.
    pub cells_covered: f64,
    /// False when `tau_1` is not much larger than `t0`, so the asymptotic
    /// estimates are not meaningful.
    pub asymptotic: bool,
}

/// `ln M(t)` for `M(t) = e^{t/tau_1} (1 + (t/t0)^2)^{-3/2} / 2`.
pub fn spreading_log_measure(t: f64, tau1: f64, t0: f64) -> f64 {
    let x = t / t0;
    t / tau1 - 1.5 * (x * x).ln_1p() - std::f64::consts::LN_2
}

/// Ratio `tau_1/t0` below which the asymptotic estimates are flagged.
const ASYMPTOTIC_RATIO: f64 = 1e3;

/// Time for a freshly branched half-measure piece to reach threshold again
/// while spreading over `(t/t0)^3` cells; searched up to `horizon_factor tau_1`.
pub fn spreading_delay(p: &PhysicalParams, horizon_factor: f64) -> Result<SpreadingDelay> {
    p.validate()?;
    let (tau1, t0) = (p.tau1(), p.t0());
    let f = |t: f64| spreading_log_measure(t, tau1, t0);
    // ln M falls until the larger root of t^2 - 3 tau_1 t + t0^2 = 0 and rises after it.
    let disc = 9.0 * tau1 * tau1 - 4.0 * t0 * t0;
    let t_min = if disc > 0.0 { 0.5 * (3.0 * tau1 + disc.sqrt()) } else { 0.0 };
    let horizon = horizon_factor * tau1;
    let root = if f(horizon) < 0.0 || t_min >= horizon {
        None
    } else {
        let (mut lo, mut hi) = (t_min, horizon);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(if f(lo).abs() < f(hi).abs() { lo } else { hi })
    };
    let ratio = tau1 / t0;
    Ok(SpreadingDelay {
        t0,
        next_branch_time: root,
        delay_factor: root.map(|r| r / tau1),
        log_delay_factor: 3.0 * ratio.ln(),
        cells_covered: ratio.powi(3),
        asymptotic: ratio >= ASYMPTOTIC_RATIO,
    })
}

/// Mass above which the branching time falls below the spreading time.
pub fn mass_threshold(p: &PhysicalParams) -> Result<f64> {
    p.validate()?;
    let w2 = p.width * p.width;
    Ok(match p.rate_scaling {
        RateScaling::MassIndependent => p.hbar * p.tau1() / w2,
        RateScaling::ProportionalToMass => (p.hbar * p.tau1() * p.reference_mass).sqrt() / p.width,
    })
}

/// Mean interval between successive branchings along a typical sub-branch
/// lineage, `tau H(Z)`.
pub fn branch_interval(p: &PhysicalParams, sp: &SplitParameter) -> Result<f64> {
    p.validate()?;
    Ok(p.tau() * limiting_mean(sp))
}

/// Dimensionless curvature ratio `3 (tau_eff / t0)^2` of the spreading
/// model; branching follows the Born weights only when it is small.
pub fn condition8_gaussian(tau_eff: f64, t0: f64) -> Result<f64> {
    if !(tau_eff >= 0.0 && t0 > 0.0) {
        return Err(Error::Domain(format!("tau_eff = {tau_eff} and t0 = {t0} must be positive")));
    }
    Ok(3.0 * (tau_eff / t0).powi(2))
}

/// `epsilon Var(H) / hbar` for count-weighted energies `(count, energy)`.
pub fn energy_drift_rate(epsilon: f64, samples: &[(f64, f64)]) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must be positive")));
    }
    let total: f64 = samples.iter().map(|s| s.0).sum();
    if samples.is_empty() || !(total > 0.0) {
        return Err(Error::Domain("no energy samples".into()));
    }
    let mean = samples.iter().map(|&(n, e)| n * e).sum::<f64>() / total;
    let var = samples.iter().map(|&(n, e)| n * (e - mean).powi(2)).sum::<f64>() / total;
    Ok(epsilon * var / HBAR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proton_spreading_time() {
        let t0 = PhysicalParams::grw_proton().t0();
        assert!((1e-7..2.5e-7).contains(&t0), "{t0}");
    }

    #[test]
    fn root_is_on_threshold() {
        let p = PhysicalParams::grw_proton();
        let d = spreading_delay(&p, 1e4).unwrap();
        let r = d.next_branch_time.unwrap();
        assert!(spreading_log_measure(r, p.tau1(), p.t0()).abs() < 1e-10);
    }

    #[test]
    fn no_root_before_short_horizon() {
        let d = spreading_delay(&PhysicalParams::grw_proton(), 10.0).unwrap();
        assert!(d.next_branch_time.is_none());
    }

    #[test]
    fn delay_approaches_log_estimate() {
        // The relative gap closes like ln ln / ln, so it is only small at
        // very large separations of scales.
        let mut gaps = Vec::new();
        for exp in [8, 16, 32, 64, 128] {
            let t0 = 1.0;
            let mut p = PhysicalParams::grw_proton();
            p.rate = 1.0 / 10f64.powi(exp);
            p.mass = t0 * p.hbar / (p.width * p.width);
            let d = spreading_delay(&p, 1e5).unwrap();
            gaps.push((d.delay_factor.unwrap() - d.log_delay_factor).abs() / d.log_delay_factor);
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[4] < 0.05, "{gaps:?}");
    }

    #[test]
    fn curvature_ratio() {
        assert_eq!(condition8_gaussian(0.0, 1.0).unwrap(), 0.0);
        assert!((condition8_gaussian(0.01, 1.0).unwrap() - 3e-4).abs() < 1e-18);
        assert!(condition8_gaussian(1.0, 0.0).is_err());
    }

    #[test]
    fn drift_of_two_point_distribution() {
        let (e, d) = (5.0, 0.25);
        let r = energy_drift_rate(2.0, &[(3.0, e - d), (3.0, e + d)]).unwrap();
        assert!((r - 2.0 * d * d / HBAR).abs() < 1e-12 * r);
        assert_eq!(energy_drift_rate(1.0, &[(1.0, 4.0), (2.0, 4.0)]).unwrap(), 0.0);
    }
}
