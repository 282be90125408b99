use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::elementary::{self, Derivs};

/// Arithmetic shared by plain floats, forward jets and taped variables.
///
/// Network and residual code is written once against this trait so the
/// same expression can be evaluated numerically, differentiated in the
/// inputs, or recorded for parameter gradients.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant living in the same context as `self` (same tape, same
    /// input dimension).
    fn constant_like(&self, c: f64) -> Self;

    fn value(&self) -> f64;

    /// Applies a unary function given its derivative table at `self.value()`.
    fn chain(self, derivs: Derivs) -> Self;

    fn sin(self) -> Self {
        let d = elementary::sin(self.value());
        self.chain(d)
    }
    fn cos(self) -> Self {
        let d = elementary::cos(self.value());
        self.chain(d)
    }
    fn exp(self) -> Self {
        let d = elementary::exp(self.value());
        self.chain(d)
    }
    fn tanh(self) -> Self {
        let d = elementary::tanh(self.value());
        self.chain(d)
    }
    fn logistic(self) -> Self {
        let d = elementary::logistic(self.value());
        self.chain(d)
    }
    fn silu(self) -> Self {
        let d = elementary::silu(self.value());
        self.chain(d)
    }
    fn powi(self, n: i32) -> Self {
        let d = elementary::powi(self.value(), n);
        self.chain(d)
    }
    /// Real power with a constant exponent. A negative base with a
    /// non-integer exponent yields NaN; see [`Scalar::checked_powf`].
    fn powf(self, p: f64) -> Self {
        let d = elementary::powf(self.value(), p);
        self.chain(d)
    }
    fn recip(self) -> Self {
        let d = elementary::recip(self.value());
        self.chain(d)
    }
    fn square(self) -> Self {
        self * self
    }

    fn checked_div(self, rhs: Self) -> Result<Self, super::AutodiffError> {
        if rhs.value() == 0.0 {
            return Err(super::AutodiffError::DivisionByZero);
        }
        Ok(self / rhs)
    }

    fn checked_powf(self, p: f64) -> Result<Self, super::AutodiffError> {
        let base = self.value();
        if base < 0.0 && p.fract() != 0.0 {
            return Err(super::AutodiffError::PowDomain { base, exponent: p });
        }
        Ok(self.powf(p))
    }
}

/// Scalars that carry input derivatives which can be read back as scalars
/// in the same context. Residual operators are written against this.
pub trait JetScalar: Scalar {
    /// First partial along input coordinate `i`.
    fn d1(&self, i: usize) -> Self;
    /// Pure second partial along input coordinate `i`.
    fn d2(&self, i: usize) -> Self;
    /// The value with its derivative payload dropped.
    fn value_part(&self) -> Self;
    /// Coordinate `index` of `point` seeded as an independent input, in
    /// the same context as `self`.
    ///
    /// # Panics
    /// If `index` is not a valid coordinate of `point`.
    fn input_like(&self, point: &[f64], index: usize) -> Self;
}

impl Scalar for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn chain(self, derivs: Derivs) -> Self {
        derivs[0]
    }
}
