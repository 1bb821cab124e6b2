//! Log-domain arithmetic for sub-branch measures.
//!
//! Every measure that appears in a run has the form `m0 · Z^a · (1-Z)^b` for
//! an initial cell measure `m0` and non-negative integers `a`, `b`. Measures
//! are therefore identified by the exact integer pair and carried as natural
//! logarithms; floating values are derived, never used as keys.

mod count;

pub use count::{BigCount, ExtFloat, DEFAULT_EXACT_BITS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for classifying `ln z / ln(1-z)` as rational.
pub const DEFAULT_RATIO_TOLERANCE: f64 = 1e-9;

/// Largest denominator considered by the rational detector.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 1_000_000;

/// The golden ratio `(1 + sqrt 5) / 2`.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Whether the ratio `ln z / ln(1-z)` is (numerically) a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioClass {
    Rational { num: u64, den: u64 },
    Irrational,
}

/// The branching fraction `Z` together with its derived logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParameter {
    z: f64,
    ln_z: f64,
    ln_one_minus_z: f64,
    ratio: f64,
    ratio_class: RatioClass,
}

impl SplitParameter {
    /// Builds a split parameter, classifying the log ratio with the given
    /// tolerance and the default maximum denominator.
    pub fn new(z: f64, ratio_tolerance: f64) -> Result<Self> {
        Self::with_max_denominator(z, ratio_tolerance, DEFAULT_MAX_DENOMINATOR)
    }

    pub fn with_max_denominator(z: f64, ratio_tolerance: f64, max_den: u64) -> Result<Self> {
        if !(z > 0.0 && z < 1.0) {
            return Err(Error::Domain(format!("split parameter z = {z} must lie in (0, 1)")));
        }
        if !(ratio_tolerance >= 0.0) || max_den == 0 {
            return Err(Error::Domain(format!(
                "ratio tolerance {ratio_tolerance} and max denominator {max_den} must be non-negative / positive"
            )));
        }
        let ln_z = z.ln();
        let ln_one_minus_z = (-z).ln_1p();
        let ratio = ln_z / ln_one_minus_z;
        let ratio_class = classify_ratio(ratio, ratio_tolerance, max_den);
        Ok(Self { z, ln_z, ln_one_minus_z, ratio, ratio_class })
    }

    /// Shorthand for [`SplitParameter::new`] with the default tolerance.
    pub fn from_z(z: f64) -> Result<Self> {
        Self::new(z, DEFAULT_RATIO_TOLERANCE)
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn ln_z(&self) -> f64 {
        self.ln_z
    }

    pub fn ln_one_minus_z(&self) -> f64 {
        self.ln_one_minus_z
    }

    /// `ln z / ln(1-z)`, always positive.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn ratio_class(&self) -> RatioClass {
        self.ratio_class
    }

    /// `min(z, 1-z)`, the lower edge of the stationary support.
    pub fn z_prime(&self) -> f64 {
        self.z.min(1.0 - self.z)
    }

    /// The larger of the two log step sizes, `max(|ln z|, |ln(1-z)|)`.
    pub fn max_log_step(&self) -> f64 {
        (-self.ln_z).max(-self.ln_one_minus_z)
    }
}

/// Continued-fraction detection of a rational `p/q` close to `x`.
///
/// A convergent is accepted when `|x - p/q| <= tol / q^2`. Every irrational
/// has infinitely many convergents within `1/q^2`, so scaling the tolerance
/// by the denominator keeps badly approximable numbers such as the golden
/// ratio irrational for any `tol < 1/sqrt(5)`.
fn classify_ratio(x: f64, tol: f64, max_den: u64) -> RatioClass {
    let (mut h_prev, mut h) = (1u64, x.floor() as u64);
    let (mut k_prev, mut k) = (0u64, 1u64);
    let mut rem = x - x.floor();
    loop {
        if (x - h as f64 / k as f64).abs() <= tol / (k as f64 * k as f64) {
            return RatioClass::Rational { num: h, den: k };
        }
        if rem <= f64::EPSILON {
            break;
        }
        let r = 1.0 / rem;
        let a = r.floor();
        rem = r - a;
        let a = a as u64;
        let (Some(h_next), Some(k_next)) = (
            a.checked_mul(h).and_then(|v| v.checked_add(h_prev)),
            a.checked_mul(k).and_then(|v| v.checked_add(k_prev)),
        ) else {
            break;
        };
        if k_next > max_den {
            break;
        }
        (h_prev, h) = (h, h_next);
        (k_prev, k) = (k, k_next);
    }
    RatioClass::Irrational
}

/// The split parameter `z*` with `ln z* / ln(1 - z*)` equal to the golden ratio.
///
/// Solved by bisection of `ln z - phi ln(1-z)` on `(0.3, 0.5)`, where it
/// changes sign exactly once.
pub fn golden_split() -> SplitParameter {
    let f = |z: f64| z.ln() - GOLDEN_RATIO * (-z).ln_1p();
    let (mut lo, mut hi) = (0.3_f64, 0.5_f64);
    while hi - lo > f64::EPSILON * hi {
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
    let z = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    SplitParameter::from_z(z).expect("golden root lies in (0, 1)")
}

/// Natural logarithm of a dimensionless measure.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogMeasure(pub f64);

impl LogMeasure {
    pub const ONE: LogMeasure = LogMeasure(0.0);

    pub fn from_measure(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain(format!("measure {m} must be positive and finite")));
        }
        Ok(Self(m.ln()))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn measure(self) -> f64 {
        self.0.exp()
    }
}

/// Aggregation key for all sub-branches of one initial component that have
/// been split `a` times by `Z` and `b` times by `1-Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassKey {
    pub component: u32,
    pub a: u32,
    pub b: u32,
}

impl ClassKey {
    pub const fn new(component: u32, a: u32, b: u32) -> Self {
        Self { component, a, b }
    }

    /// Child that receives the `Z` share of the measure.
    pub fn z_child(self) -> Self {
        Self { a: self.a + 1, ..self }
    }

    /// Child that keeps the `1-Z` share of the measure.
    pub fn residual_child(self) -> Self {
        Self { b: self.b + 1, ..self }
    }
}

/// `ln(m0 · Z^a · (1-Z)^b)`.
pub fn class_measure(key: ClassKey, m0: LogMeasure, sp: &SplitParameter) -> LogMeasure {
    exponent_measure(key.a, key.b, m0, sp)
}

pub(crate) fn exponent_measure(a: u32, b: u32, m0: LogMeasure, sp: &SplitParameter) -> LogMeasure {
    LogMeasure(m0.0 + f64::from(a) * sp.ln_z + f64::from(b) * sp.ln_one_minus_z)
}

/// Slack allowed above threshold before [`branch_time`] rejects a state.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Time at which `m · g · e^{t/tau}` reaches one: `t* = -tau (ln m + ln g)`.
pub fn branch_time(m: LogMeasure, g: f64, tau: f64) -> Result<f64> {
    if !(g > 0.0) || !(tau > 0.0) {
        return Err(Error::Domain(format!("g = {g} and tau = {tau} must be positive")));
    }
    let ln_m_g = m.0 + g.ln();
    if ln_m_g > THRESHOLD_SLACK {
        return Err(Error::Precondition(format!(
            "state already past threshold: ln m + ln g = {ln_m_g:e} > 0"
        )));
    }
    Ok(-tau * ln_m_g.min(0.0))
}

/// Streaming `ln Σ exp(x_i)`.
///
/// Terms are summed relative to the running maximum with Neumaier
/// compensation; the partial sum is rescaled whenever the maximum moves.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
    comp: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            let scale = (self.max - x).exp();
            self.sum *= scale;
            self.comp *= scale;
            self.max = x;
            self.push(1.0);
        } else {
            self.push((x - self.max).exp());
        }
    }

    fn push(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    /// The accumulated `ln Σ exp(x_i)`; negative infinity when empty.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + (self.sum + self.comp).ln()
        }
    }
}

/// `ln Σ exp(x_i)` over a sequence; the empty sum is negative infinity.
pub fn logsumexp_accumulate<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = LogSumExp::new();
    for x in terms {
        acc.add(x);
    }
    acc.value()
}
