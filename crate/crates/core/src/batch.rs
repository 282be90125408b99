//! Column-blocked jets for a batch of points.
//!
//! A [`JetBatch`] stores one row per neuron and `components * points`
//! columns. Column block 0 holds values, blocks `1..=dim` the first partials
//! along each input coordinate and blocks `dim+1..=2*dim` the pure second
//! partials. Value-only batches have a single block. Keeping derivative
//! components as extra columns turns every dense layer into one matrix
//! product over all components at once.

use ndarray::{s, Array2, ArrayView2};

use crate::autodiff::elementary::Derivs;

/// How many derivative orders a batch carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Value,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub points: usize,
    pub dim: usize,
    pub order: Order,
}

impl Layout {
    pub fn components(&self) -> usize {
        match self.order {
            Order::Value => 1,
            Order::Second => 1 + 2 * self.dim,
        }
    }

    pub fn columns(&self) -> usize {
        self.components() * self.points
    }

    fn derivative_dims(&self) -> usize {
        match self.order {
            Order::Value => 0,
            Order::Second => self.dim,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JetBatch {
    pub layout: Layout,
    pub data: Array2<f64>,
}

impl JetBatch {
    /// Lifts every coordinate of every point, applying `x * scale + shift`
    /// per coordinate.
    pub fn from_points(points: &[[f64; 2]], dim: usize, order: Order, affine: &[(f64, f64)]) -> Self {
        assert_eq!(affine.len(), dim);
        let layout = Layout { points: points.len(), dim, order };
        let n = layout.points;
        let mut data = Array2::zeros((dim, layout.columns()));
        for (i, &(scale, shift)) in affine.iter().enumerate() {
            let mut row = data.row_mut(i);
            for (p, point) in points.iter().enumerate() {
                row[p] = point[i] * scale + shift;
            }
            if order == Order::Second {
                row.slice_mut(s![(1 + i) * n..(2 + i) * n]).fill(scale);
            }
        }
        JetBatch { layout, data }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., ..self.layout.points])
    }

    /// Column of component `comp` for point `p`.
    pub fn col(&self, comp: usize, p: usize) -> usize {
        comp * self.layout.points + p
    }
}

/// Component indices inside a jet row.
pub fn d1_block(c: usize) -> usize {
    1 + c
}

pub fn d2_block(layout: &Layout, c: usize) -> usize {
    1 + layout.dim + c
}

/// Applies a unary function elementwise to one row of jets.
pub fn unary_forward(layout: &Layout, x: &[f64], out: &mut [f64], f: &[Derivs]) {
    let n = layout.points;
    for p in 0..n {
        out[p] = f[p][0];
    }
    for c in 0..layout.derivative_dims() {
        let (b1, b2) = (d1_block(c) * n, d2_block(layout, c) * n);
        for p in 0..n {
            let [_, f1, f2, _] = f[p];
            let xd = x[b1 + p];
            out[b1 + p] = f1 * xd;
            out[b2 + p] = f2 * xd * xd + f1 * x[b2 + p];
        }
    }
}

/// Reverse of [`unary_forward`]: accumulates into `x_bar` the adjoint of the
/// input row given the adjoint `y_bar` of the output row.
pub fn unary_backward(layout: &Layout, x: &[f64], y_bar: &[f64], x_bar: &mut [f64], f: &[Derivs]) {
    let n = layout.points;
    for p in 0..n {
        x_bar[p] += y_bar[p] * f[p][1];
    }
    for c in 0..layout.derivative_dims() {
        let (b1, b2) = (d1_block(c) * n, d2_block(layout, c) * n);
        for p in 0..n {
            let [_, f1, f2, f3] = f[p];
            let (xd, xdd) = (x[b1 + p], x[b2 + p]);
            let (yd, ydd) = (y_bar[b1 + p], y_bar[b2 + p]);
            x_bar[p] += yd * f2 * xd + ydd * (f3 * xd * xd + f2 * xdd);
            x_bar[b1 + p] += yd * f1 + 2.0 * ydd * f2 * xd;
            x_bar[b2 + p] += ydd * f1;
        }
    }
}
