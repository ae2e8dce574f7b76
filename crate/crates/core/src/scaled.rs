//! Mantissa/exponent floats for probabilities below the `f64` range.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

/// `value = mantissa * 2^exponent` with `mantissa ∈ [1, 2)`, or exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledFloat {
    mantissa: f64,
    exponent: i64,
}

/// Splits a finite positive `x` into `(m, e)` with `x = m * 2^e`, `m ∈ [1, 2)`.
fn frexp(x: f64) -> (f64, i64) {
    debug_assert!(x.is_finite() && x > 0.0);
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    if raw_exp == 0 {
        // subnormal: rescale into the normal range first
        let (m, e) = frexp(x * f64::powi(2.0, 64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
    (m, raw_exp - 1023)
}

/// `2^e` for any `e`, saturating to 0 or +∞ outside the representable range.
pub(crate) fn pow2(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

impl ScaledFloat {
    pub const ZERO: ScaledFloat = ScaledFloat { mantissa: 0.0, exponent: 0 };
    pub const ONE: ScaledFloat = ScaledFloat { mantissa: 1.0, exponent: 0 };

    /// Builds `x * 2^exp`. Panics on negative or non-finite `x`.
    pub fn from_parts(x: f64, exp: i64) -> Self {
        assert!(x.is_finite() && x >= 0.0, "ScaledFloat needs a finite nonnegative value, got {x}");
        if x == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = frexp(x);
        ScaledFloat { mantissa: m, exponent: e + exp }
    }

    pub fn from_f64(x: f64) -> Self {
        Self::from_parts(x, 0)
    }

    /// From a natural logarithm; `-∞` maps to zero.
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let l2 = ln / std::f64::consts::LN_2;
        let e = l2.floor();
        Self::from_parts((l2 - e).exp2(), e as i64)
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// Nearest `f64`; underflows to 0 below the subnormal range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.exponent < -1074 - 1 {
            return 0.0;
        }
        if self.exponent >= -1022 {
            self.mantissa * pow2(self.exponent)
        } else {
            // split to avoid double rounding through an intermediate subnormal
            self.mantissa * pow2(-1022) * pow2(self.exponent + 1022)
        }
    }

    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.exponent as f64 + self.mantissa.log2()
        }
    }

    pub fn ln(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.exponent as f64 * std::f64::consts::LN_2 + self.mantissa.ln()
        }
    }
}

impl Default for ScaledFloat {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Add for ScaledFloat {
    type Output = ScaledFloat;

    fn add(self, rhs: ScaledFloat) -> ScaledFloat {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exponent >= rhs.exponent { (self, rhs) } else { (rhs, self) };
        let shift = hi.exponent - lo.exponent;
        if shift > 60 {
            return hi;
        }
        ScaledFloat::from_parts(hi.mantissa + lo.mantissa * pow2(-shift), hi.exponent)
    }
}

impl AddAssign for ScaledFloat {
    fn add_assign(&mut self, rhs: ScaledFloat) {
        *self = *self + rhs;
    }
}

impl Mul for ScaledFloat {
    type Output = ScaledFloat;

    fn mul(self, rhs: ScaledFloat) -> ScaledFloat {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        ScaledFloat::from_parts(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Mul<f64> for ScaledFloat {
    type Output = ScaledFloat;

    fn mul(self, rhs: f64) -> ScaledFloat {
        self * ScaledFloat::from_f64(rhs)
    }
}

impl PartialOrd for ScaledFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => match self.exponent.cmp(&other.exponent) {
                Ordering::Equal => self.mantissa.partial_cmp(&other.mantissa),
                ord => Some(ord),
            },
        }
    }
}

impl std::iter::Sum for ScaledFloat {
    fn sum<I: Iterator<Item = ScaledFloat>>(iter: I) -> Self {
        iter.fold(ScaledFloat::ZERO, |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_mantissa() {
        let x = ScaledFloat::from_f64(6.0);
        assert_eq!(x.mantissa(), 1.5);
        assert_eq!(x.exponent(), 2);
        assert_eq!(x.to_f64(), 6.0);
        assert!(ScaledFloat::from_f64(0.0).is_zero());
    }

    #[test]
    fn survives_below_double_range() {
        let tiny = ScaledFloat::from_ln(-5000.0);
        assert_eq!(tiny.to_f64(), 0.0);
        assert!((tiny.ln() + 5000.0).abs() < 1e-9);
        let sq = tiny * tiny;
        assert!((sq.ln() + 10000.0).abs() < 1e-9);
        let twice = tiny + tiny;
        assert!((twice.ln() - (-5000.0 + std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn subnormal_inputs() {
        let x = f64::from_bits(1); // smallest subnormal
        let s = ScaledFloat::from_f64(x);
        assert_eq!(s.exponent(), -1074);
        assert_eq!(s.to_f64(), x);
    }

    proptest! {
        #[test]
        fn add_matches_f64(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let s = (ScaledFloat::from_f64(a) + ScaledFloat::from_f64(b)).to_f64();
            prop_assert!((s - (a + b)).abs() <= 1e-15 * (a + b).max(1e-300));
        }

        #[test]
        fn mul_and_ln_agree(la in -2000.0f64..10.0, lb in -2000.0f64..10.0) {
            let p = ScaledFloat::from_ln(la) * ScaledFloat::from_ln(lb);
            prop_assert!((p.ln() - (la + lb)).abs() < 1e-9 * (1.0 + (la + lb).abs()));
        }
    }
}
