use std::ops::{Add, Div, Mul, Neg, Sub};

use super::elementary::Derivs;
use super::scalar::{JetScalar, Scalar};
use super::AutodiffError;

/// Largest supported input dimension.
pub const MAX_INPUT_DIM: usize = 2;

/// Second-order forward jet: a value with its first and pure second
/// partials along each input coordinate. Unused coordinates stay zero.
///
/// Mixed partials are not carried.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: [f64; MAX_INPUT_DIM],
    pub d2: [f64; MAX_INPUT_DIM],
}

impl Jet {
    pub const fn constant(value: f64) -> Self {
        Jet { value, d1: [0.0; MAX_INPUT_DIM], d2: [0.0; MAX_INPUT_DIM] }
    }

    /// Seeds coordinate `index` of `point` as an independent variable.
    pub fn lift(point: &[f64], index: usize) -> Result<Self, AutodiffError> {
        let dim = point.len();
        if dim == 0 || dim > MAX_INPUT_DIM || index >= dim {
            return Err(AutodiffError::InputIndex { index, dim });
        }
        let mut jet = Jet::constant(point[index]);
        jet.d1[index] = 1.0;
        Ok(jet)
    }

    /// Lifts every coordinate of `point`.
    pub fn lift_all(point: &[f64]) -> Result<Vec<Self>, AutodiffError> {
        (0..point.len()).map(|i| Jet::lift(point, i)).collect()
    }

    /// `∂²/∂x_i∂x_j`. Only pure second partials are tracked.
    ///
    /// # Panics
    /// If `i != j`.
    pub fn second_partial(&self, i: usize, j: usize) -> f64 {
        assert_eq!(i, j, "mixed second partials are not tracked");
        self.d2[i]
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Jet { value: f(self.value), d1: self.d1.map(&f), d2: self.d2.map(&f) }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut out = self;
        out.value += rhs.value;
        for c in 0..MAX_INPUT_DIM {
            out.d1[c] += rhs.d1[c];
            out.d2[c] += rhs.d2[c];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|v| -v)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let (a, b) = (self, rhs);
        let mut out = Jet::constant(a.value * b.value);
        for c in 0..MAX_INPUT_DIM {
            out.d1[c] = a.d1[c] * b.value + a.value * b.d1[c];
            out.d2[c] = a.d2[c] * b.value + 2.0 * a.d1[c] * b.d1[c] + a.value * b.d2[c];
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.map(|v| v * rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.map(|v| v / rhs)
    }
}

impl Scalar for Jet {
    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(c)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn chain(self, [f0, f1, f2, _]: Derivs) -> Self {
        let mut out = Jet::constant(f0);
        for c in 0..MAX_INPUT_DIM {
            out.d1[c] = f1 * self.d1[c];
            out.d2[c] = f2 * self.d1[c] * self.d1[c] + f1 * self.d2[c];
        }
        out
    }
}

impl JetScalar for Jet {
    fn d1(&self, i: usize) -> Self {
        Jet::constant(self.d1[i])
    }
    fn d2(&self, i: usize) -> Self {
        Jet::constant(self.d2[i])
    }
    fn value_part(&self) -> Self {
        Jet::constant(self.value)
    }
    fn input_like(&self, point: &[f64], index: usize) -> Self {
        Jet::lift(point, index).expect("input coordinate in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_seeds_unit_derivative() {
        let x = Jet::lift(&[0.5], 0).unwrap();
        assert_eq!((x.value, x.d1[0], x.d2[0]), (0.5, 1.0, 0.0));
        let t = Jet::lift(&[0.1, 0.2], 1).unwrap();
        assert_eq!(t.value, 0.2);
        assert_eq!(t.d1, [0.0, 1.0]);
        assert_eq!(t.d2, [0.0, 0.0]);
    }

    #[test]
    fn constants_have_no_derivatives() {
        let c = Jet::constant(3.0);
        assert_eq!(c.d1, [0.0, 0.0]);
        assert_eq!(c.d2, [0.0, 0.0]);
    }

    #[test]
    fn lift_rejects_bad_index() {
        assert!(matches!(Jet::lift(&[1.0], 1), Err(AutodiffError::InputIndex { .. })));
        assert!(Jet::lift(&[1.0, 2.0, 3.0], 0).is_err());
    }

    #[test]
    fn sine_and_square_derivatives() {
        let x = Jet::lift(&[0.0], 0).unwrap();
        let s = x.sin();
        assert_eq!((s.d1[0], s.d2[0]), (1.0, 0.0));
        let x = Jet::lift(&[3.0], 0).unwrap();
        let sq = x * x;
        assert_eq!((sq.d1[0], sq.d2[0]), (6.0, 2.0));
    }

    #[test]
    fn logistic_weighted_identity_slope() {
        let x = Jet::lift(&[0.0], 0).unwrap();
        let r = x / (x.constant_like(1.0) + (-x).exp());
        assert!((r.d1[0] - 0.5).abs() < 1e-15);
        assert!((x.silu().d1[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "mixed second partials")]
    fn mixed_partials_are_refused() {
        Jet::lift(&[0.1, 0.2], 0).unwrap().second_partial(0, 1);
    }

    #[test]
    fn checked_ops_report_domain_errors() {
        let x = Jet::lift(&[-2.0], 0).unwrap();
        assert!(matches!(x.checked_powf(0.5), Err(AutodiffError::PowDomain { .. })));
        assert!(x.checked_powf(2.0).is_ok());
        assert!(matches!(x.checked_div(Jet::constant(0.0)), Err(AutodiffError::DivisionByZero)));
    }
}
