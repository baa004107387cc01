//! Scalar abstractions.
//!
//! [`Field`] is the minimal arithmetic needed by exact moment functionals and
//! the orthogonal-polynomial recurrence; it is implemented for `f32`, `f64`
//! and the rational types from `num-rational`. [`Scalar`] adds the floating
//! point operations (square roots, eigen-iterations) the quadrature path
//! needs.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, Signed};

/// Ordered field arithmetic with a notion of "numerically zero".
pub trait Field: Clone + PartialOrd + Num + Signed + Debug {
    /// Relative floor under which a squared norm or pivot is treated as zero.
    /// Exact types return zero.
    fn degeneracy_floor() -> Self;

    fn is_finite_value(&self) -> bool {
        true
    }
}

/// Floating-point scalar used by the numerical core.
pub trait Scalar: Field + Float + FromPrimitive + Display + Sum + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Field for f64 {
    fn degeneracy_floor() -> Self {
        1e-12
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Field for f32 {
    fn degeneracy_floor() -> Self {
        1e-5
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}

impl Field for BigRational {
    fn degeneracy_floor() -> Self {
        Ratio::from_integer(BigInt::from(0))
    }
}

impl Field for Ratio<i64> {
    fn degeneracy_floor() -> Self {
        Ratio::from_integer(0)
    }
}

impl Field for Ratio<i128> {
    fn degeneracy_floor() -> Self {
        Ratio::from_integer(0)
    }
}

/// Neumaier's compensated accumulator.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Float> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Float> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<T: Float, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn floors() {
        assert_eq!(<f64 as Field>::degeneracy_floor(), 1e-12);
        assert_eq!(
            <Ratio<i64> as Field>::degeneracy_floor(),
            Ratio::from_integer(0)
        );
        assert!(!f64::NAN.is_finite_value());
    }
}
