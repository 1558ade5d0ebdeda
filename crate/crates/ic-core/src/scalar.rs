//! Scalar abstraction shared by schedules, thresholds and codec parameters.
//!
//! Probabilities and thresholds are written once against [`Scalar`] and can be
//! evaluated in `f32`, `f64`, or exactly with rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio, Rational64};
use num_traits::{Num, ToPrimitive};

/// Numeric type usable for probabilities and thresholds.
pub trait Scalar: Clone + PartialOrd + Debug + Num + Send + Sync + 'static {
    /// The value `num / den`.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Lossy conversion used when sampling.
    fn to_f64(&self) -> f64;

    fn from_u64(v: u64) -> Self {
        Self::from_ratio(v as i64, 1)
    }

    fn half() -> Self {
        Self::from_ratio(1, 2)
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for Rational64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Smallest `m >= 0` with `2^m * p >= 1`, i.e. `ceil(log2(1/p))` for `0 < p <= 1`.
pub fn ceil_log2_inv<S: Scalar>(p: &S) -> u32 {
    assert!(*p > S::zero(), "probability must be positive");
    let two = S::one() + S::one();
    let mut acc = p.clone();
    let mut m = 0;
    while acc < S::one() {
        acc = acc * two.clone();
        m += 1;
    }
    m
}

/// `ceil(log2(v))` for `v >= 1`, exact on integers.
pub fn ceil_log2_u128(v: u128) -> u32 {
    assert!(v >= 1);
    if v == 1 {
        0
    } else {
        128 - (v - 1).leading_zeros()
    }
}
