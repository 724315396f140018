use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, the exact arithmetic mode.
pub type Rational = BigRational;

/// Numeric field used by distributions and evaluators.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Whether arithmetic is exact; identities are then checked with `==`.
    const EXACT: bool;

    /// Exact conversion from a protocol probability.
    fn from_ratio(r: &Ratio<i64>) -> Self;

    /// Conversion from a float. Exact for rationals (every finite `f64` is a
    /// dyadic rational).
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn from_int(i: i64) -> Self {
        Self::from_ratio(&Ratio::from_integer(i))
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// `|a - b| <= tol` in float mode, `a == b` in exact mode.
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.to_f64() - other.to_f64()).abs() <= tol
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(r: &Ratio<i64>) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(r: &Ratio<i64>) -> Self {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }

    fn from_f64(x: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(x).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // Numerator or denominator overflowed f64 range on its own.
            let n = self.numer().to_f64().unwrap_or(f64::INFINITY);
            let d = self.denom().to_f64().unwrap_or(f64::INFINITY);
            n / d
        })
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Scalar for Ratio<i64> {
    const EXACT: bool = true;

    fn from_ratio(r: &Ratio<i64>) -> Self {
        *r
    }

    fn from_f64(x: f64) -> Self {
        Ratio::approximate_float(x).expect("representable float")
    }

    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trips_floats_exactly() {
        let r = <Rational as Scalar>::from_f64(0.1);
        assert_eq!(Scalar::to_f64(&r), 0.1);
        assert_ne!(r, Rational::new(1.into(), 10.into()));
    }

    #[test]
    fn approx_eq_is_strict_in_exact_mode() {
        let a = Rational::from_int(1);
        let b = a.clone() + Rational::new(1.into(), BigInt::from(10).pow(30));
        assert!(!a.approx_eq(&b, 1.0));
        assert!(1.0f64.approx_eq(&(1.0 + 1e-13), 1e-12));
    }
}
