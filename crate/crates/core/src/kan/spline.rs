//! Uniform B-spline grids.
//!
//! A grid over `[lo, hi]` with `G` intervals and degree `k` has the extended
//! knot vector `t_j = lo + (j - k) h`, `j = 0..=G + 2k`, and `G + k` basis
//! functions. Inputs outside `[lo, hi]` are evaluated with the polynomial
//! piece of the nearest boundary interval, so the basis stays smooth there.

use crate::autodiff::Scalar;
use crate::error::ModelError;

pub const MAX_DEGREE: usize = 7;

/// Highest derivative order returned by [`SplineGrid::basis_derivs`].
pub const DERIV_ORDERS: usize = 3;

/// Values and derivatives (orders 0..=3) of the `k + 1` active basis
/// functions at one point. `ders[n][j]` is the n-th derivative of basis
/// `first + j`.
#[derive(Clone, Copy, Debug)]
pub struct ActiveBasis {
    pub first: usize,
    pub ders: [[f64; MAX_DEGREE + 1]; DERIV_ORDERS + 1],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplineGrid {
    lo: f64,
    hi: f64,
    intervals: usize,
    degree: usize,
    inv_h: f64,
    knots: Vec<f64>,
}

impl SplineGrid {
    pub fn new(lo: f64, hi: f64, intervals: usize, degree: usize) -> Result<Self, ModelError> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(ModelError::InvalidSpec(format!("spline range [{lo}, {hi}] is empty")));
        }
        if intervals == 0 {
            return Err(ModelError::InvalidSpec("spline grid needs at least one interval".into()));
        }
        if degree == 0 || degree > MAX_DEGREE {
            return Err(ModelError::InvalidSpec(format!("spline order {degree} outside 1..={MAX_DEGREE}")));
        }
        let h = (hi - lo) / intervals as f64;
        let knots = (0..=intervals + 2 * degree).map(|j| lo + (j as f64 - degree as f64) * h).collect();
        Ok(SplineGrid { lo, hi, intervals, degree, inv_h: 1.0 / h, knots })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.intervals + self.degree
    }

    /// Knot span `s` with `t_s <= x < t_{s+1}`, clamped to the grid.
    pub fn span(&self, x: f64) -> usize {
        let cell = ((x - self.lo) * self.inv_h).floor();
        let cell = if cell.is_nan() { 0.0 } else { cell.clamp(0.0, (self.intervals - 1) as f64) };
        self.degree + cell as usize
    }

    /// The `k + 1` basis functions that can be nonzero at `x`, via the
    /// Cox–de Boor recursion. Returns the index of the first one.
    pub fn active_basis<S: Scalar>(&self, x: S) -> (usize, Vec<S>) {
        let k = self.degree;
        let s = self.span(x.value());
        let t = &self.knots;
        let mut n = vec![x.constant_like(1.0)];
        for j in 1..=k {
            let mut saved = x.constant_like(0.0);
            let mut next = Vec::with_capacity(j + 1);
            for r in 0..j {
                // N_{s-j+1+r, j-1} splits onto its two order-j neighbours.
                let lo_knot = t[s + 1 + r - j];
                let hi_knot = t[s + 1 + r];
                let temp = n[r] / (hi_knot - lo_knot);
                next.push(saved + temp * (-x + hi_knot));
                saved = temp * (x - lo_knot);
            }
            next.push(saved);
            n = next;
        }
        (s - k, n)
    }

    /// All `G + k` basis functions at `x`; inactive ones are constant zero.
    pub fn basis<S: Scalar>(&self, x: S) -> Vec<S> {
        let (first, active) = self.active_basis(x);
        let mut out = vec![x.constant_like(0.0); self.num_basis()];
        out[first..first + active.len()].copy_from_slice(&active);
        out
    }

    /// Active basis values with derivatives up to third order.
    pub fn basis_derivs(&self, x: f64) -> ActiveBasis {
        let (first, b) = with_degree!(self.degree, P => self.active_derivs::<P>(x));
        let mut ders = [[0.0; MAX_DEGREE + 1]; DERIV_ORDERS + 1];
        for (j, d) in b.iter().enumerate().take(self.degree + 1) {
            for m in 0..=DERIV_ORDERS {
                ders[m][j] = d[m];
            }
        }
        ActiveBasis { first, ders }
    }

    /// First active basis at `x` and, per active basis, its value and first
    /// three derivatives. `P` must equal the grid degree.
    ///
    /// On a uniform grid the n-th derivative of a degree-`P` basis is an
    /// n-th forward difference of degree-`P - n` bases scaled by `h⁻ⁿ`, so
    /// one Cox–de Boor triangle in the local coordinate gives everything.
    #[inline(always)]
    pub(crate) fn active_derivs<const P: usize>(&self, x: f64) -> (usize, [[f64; DERIV_ORDERS + 1]; MAX_DEGREE + 1]) {
        debug_assert_eq!(P, self.degree);
        let s = self.span(x);
        let u = (x - self.knots[s]) * self.inv_h;
        let mut out = [[0.0; DERIV_ORDERS + 1]; MAX_DEGREE + 1];
        if P == 3 {
            let (v, u2) = (1.0 - u, u * u);
            let i1 = self.inv_h;
            let i2 = i1 * i1;
            let i3 = i2 * i1;
            out[0] = [v * v * v / 6.0, -0.5 * v * v * i1, v * i2, -i3];
            out[1] = [(3.0 * u2 * u - 6.0 * u2 + 4.0) / 6.0, (1.5 * u2 - 2.0 * u) * i1, (3.0 * u - 2.0) * i2, 3.0 * i3];
            out[2] = [
                (-3.0 * u2 * u + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
                (-1.5 * u2 + u + 0.5) * i1,
                (1.0 - 3.0 * u) * i2,
                -3.0 * i3,
            ];
            out[3] = [u2 * u / 6.0, 0.5 * u2 * i1, u * i2, i3];
            return (s - 3, out);
        }
        // tri[d][r]: degree-d basis s - d + r
        let mut tri = [[0.0; MAX_DEGREE + 1]; MAX_DEGREE + 1];
        tri[0][0] = 1.0;
        for d in 1..=P {
            let inv = 1.0 / d as f64;
            tri[d][0] = (1.0 - u) * tri[d - 1][0] * inv;
            for r in 1..d {
                tri[d][r] = ((u + (d - r) as f64) * tri[d - 1][r - 1] + (r as f64 + 1.0 - u) * tri[d - 1][r]) * inv;
            }
            tri[d][d] = u * tri[d - 1][d - 1] * inv;
        }
        for r in 0..=P {
            out[r][0] = tri[P][r];
        }
        let mut scale = 1.0;
        for m in 1..=DERIV_ORDERS.min(P) {
            scale *= self.inv_h;
            // lower-degree bases padded with m zeros on each side
            let mut padded = [0.0; MAX_DEGREE + 1 + 2 * DERIV_ORDERS];
            padded[m..=P].copy_from_slice(&tri[P - m][..=P - m]);
            let weights = &BINOMIAL_SIGNED[m];
            for r in 0..=P {
                let mut acc = 0.0;
                for j in 0..=m {
                    acc += weights[j] * padded[r + j];
                }
                out[r][m] = acc * scale;
            }
        }
        (s - P, out)
    }
}

/// `(-1)^j C(m, j)`.
const BINOMIAL_SIGNED: [[f64; DERIV_ORDERS + 1]; DERIV_ORDERS + 1] =
    [[1.0, 0.0, 0.0, 0.0], [1.0, -1.0, 0.0, 0.0], [1.0, -2.0, 1.0, 0.0], [1.0, -3.0, 3.0, -1.0]];
