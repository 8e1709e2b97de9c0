//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the probability and quadrature code is written against.
///
/// Implemented for `f32` and `f64`. Tolerances that only make sense in double
/// precision are clamped through [`Real::tolerance_floor`].
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Sum + Send + Sync + 'static
{
    /// Smallest relative tolerance an iterative routine may be asked to reach.
    fn tolerance_floor() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }

    /// Converts an `f64` literal. Every literal used in the crate is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits the scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }

    #[inline]
    fn from_u64_lossy(n: u64) -> Self {
        Self::from_u64(n).unwrap_or_else(Self::infinity)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 - exp(-x))` for `x > 0`, accurate at both ends.
pub fn ln_one_minus_exp_neg<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::neg_infinity();
    }
    if x < T::LN_2() {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct_sum() {
        let v: f64 = log_add_exp(1.0_f64.ln(), 3.0_f64.ln());
        assert!((v - 4.0_f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
    }

    #[test]
    fn ln_one_minus_exp_neg_small_and_large() {
        let x = 1e-12_f64;
        let v = ln_one_minus_exp_neg(x);
        assert!((v - x.ln()).abs() < 1e-9);
        let big = ln_one_minus_exp_neg(40.0_f64);
        assert!((big + (-40.0_f64).exp()).abs() < 1e-30);
    }

    #[test]
    fn f32_tolerance_floor_is_coarser() {
        assert!(f32::tolerance_floor() as f64 > f64::tolerance_floor());
    }
}
