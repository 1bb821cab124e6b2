//! Sub-branch counts that outgrow native integers.
//!
//! Runs to thousands of `tau` produce counts near `2^10000`. Counts start as
//! exact big integers and switch to an extended-range float once they exceed
//! a bit budget; the statistics only ever need ratios.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Default bit budget before a count leaves exact mode.
pub const DEFAULT_EXACT_BITS: u64 = 256;

const EXP_MASK: u64 = 0x7ff << 52;

/// `2^k` for `k` in the normal exponent range.
fn pow2(k: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// A non-negative real `mant · 2^exp` with `mant` in `[1, 2)` (or zero).
///
/// Addition is accurate to a couple of ulps regardless of magnitude, which a
/// plain `ln`-valued float is not once `ln n` reaches the thousands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtFloat {
    mant: f64,
    exp: i64,
}

impl ExtFloat {
    pub const ZERO: ExtFloat = ExtFloat { mant: 0.0, exp: 0 };
    pub const ONE: ExtFloat = ExtFloat { mant: 1.0, exp: 0 };

    pub fn from_f64(x: f64) -> Self {
        assert!(x >= 0.0 && x.is_finite(), "ExtFloat requires a finite non-negative value, got {x}");
        Self { mant: x, exp: 0 }.normalized()
    }

    /// `e^ln_x`, for any finite `ln_x`.
    pub fn from_ln(ln_x: f64) -> Self {
        if ln_x == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let k = (ln_x / std::f64::consts::LN_2).floor();
        let rest = ln_x - k * std::f64::consts::LN_2;
        Self { mant: rest.exp(), exp: k as i64 }.normalized()
    }

    pub fn from_biguint(n: &BigUint) -> Self {
        let bits = n.bits();
        if bits <= 64 {
            return Self::from_f64(n.to_u64().expect("fits in 64 bits") as f64);
        }
        let shift = bits - 64;
        let top = (n >> shift).to_u64().expect("64 leading bits");
        let mut v = Self::from_f64(top as f64);
        v.exp += shift as i64;
        v
    }

    fn normalized(mut self) -> Self {
        if self.mant == 0.0 {
            return Self::ZERO;
        }
        if self.mant < f64::MIN_POSITIVE {
            self.mant *= pow2(64);
            self.exp -= 64;
        }
        let bits = self.mant.to_bits();
        let e = ((bits & EXP_MASK) >> 52) as i64 - 1023;
        self.mant = f64::from_bits((bits & !EXP_MASK) | (1023 << 52));
        self.exp += e;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0.0
    }

    pub fn ln(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mant.ln() + self.exp as f64 * std::f64::consts::LN_2
        }
    }

    /// The value as `f64`; overflows to infinity beyond `f64::MAX`.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else if self.exp > 1023 {
            f64::INFINITY
        } else if self.exp < -1022 {
            self.mant * pow2(self.exp + 64) * pow2(-64)
        } else {
            self.mant * pow2(self.exp)
        }
    }

    pub fn add(self, other: Self) -> Self {
        if other.is_zero() {
            return self;
        }
        if self.is_zero() {
            return other;
        }
        let (hi, lo) = if self.exp >= other.exp { (self, other) } else { (other, self) };
        let d = hi.exp - lo.exp;
        if d > 60 {
            return hi;
        }
        Self { mant: hi.mant + lo.mant * pow2(-d), exp: hi.exp }.normalized()
    }

    pub fn mul(self, other: Self) -> Self {
        Self { mant: self.mant * other.mant, exp: self.exp + other.exp }.normalized()
    }

    /// `self / other` as a plain float; panics on a zero divisor.
    pub fn ratio(self, other: Self) -> f64 {
        assert!(!other.is_zero(), "division by a zero count");
        if self.is_zero() {
            return 0.0;
        }
        let d = self.exp - other.exp;
        let q = self.mant / other.mant;
        if d > 1023 {
            f64::INFINITY
        } else if d < -1022 {
            0.0
        } else {
            q * pow2(d)
        }
    }
}

impl PartialOrd for ExtFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            _ => Some(self.exp.cmp(&other.exp).then(self.mant.total_cmp(&other.mant))),
        }
    }
}

/// Sub-branch count: exact while small, extended-range float afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigCount {
    Exact(BigUint),
    Scaled(ExtFloat),
}

impl Default for BigCount {
    fn default() -> Self {
        BigCount::zero()
    }
}

impl BigCount {
    pub fn zero() -> Self {
        BigCount::Exact(BigUint::zero())
    }

    pub fn from_u64(n: u64) -> Self {
        BigCount::Exact(BigUint::from(n))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, BigCount::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BigCount::Exact(n) => n.is_zero(),
            BigCount::Scaled(x) => x.is_zero(),
        }
    }

    pub fn as_exact(&self) -> Option<&BigUint> {
        match self {
            BigCount::Exact(n) => Some(n),
            BigCount::Scaled(_) => None,
        }
    }

    pub fn to_ext(&self) -> ExtFloat {
        match self {
            BigCount::Exact(n) => ExtFloat::from_biguint(n),
            BigCount::Scaled(x) => *x,
        }
    }

    /// Natural log of the count; negative infinity for zero.
    pub fn ln(&self) -> f64 {
        self.to_ext().ln()
    }

    pub fn to_f64(&self) -> f64 {
        self.to_ext().to_f64()
    }

    /// Adds `other`, leaving exact mode once the sum needs more than
    /// `exact_bits` bits.
    pub fn add_assign(&mut self, other: &BigCount, exact_bits: u64) {
        match (&mut *self, other) {
            (BigCount::Exact(a), BigCount::Exact(b)) => {
                *a += b;
                if a.bits() > exact_bits {
                    *self = BigCount::Scaled(ExtFloat::from_biguint(a));
                }
            }
            (BigCount::Scaled(a), b) => *a = a.add(b.to_ext()),
            (BigCount::Exact(a), BigCount::Scaled(b)) => {
                *self = BigCount::Scaled(ExtFloat::from_biguint(a).add(*b));
            }
        }
    }
}

impl fmt::Display for BigCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BigCount::Exact(n) => write!(f, "{n}"),
            BigCount::Scaled(x) => write!(f, "exp({:.17e})", x.ln()),
        }
    }
}
