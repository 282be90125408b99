//! Kolmogorov–Arnold branch: every edge carries a learnable univariate
//! function `φ(x) = c_r · silu(x) + c_B · Σ_i c_i B_i(x)`.
//!
//! Batched evaluation expands each input node into `G + k + 1` features
//! (silu plus the spline basis), of which only `k + 2` are nonzero at any
//! point. A layer is a product of an effective weight matrix with those
//! features, where the weight of the silu feature is `c_r` and the weight
//! of basis `i` is `c_B · c_i`, evaluated over cache-sized point blocks.

/// Evaluates `$body` with the const `$p` bound to a runtime spline degree
/// in `1..=MAX_DEGREE`.
macro_rules! with_degree {
    ($degree:expr, $p:ident => $body:expr) => {
        match $degree {
            1 => {
                const $p: usize = 1;
                $body
            }
            2 => {
                const $p: usize = 2;
                $body
            }
            3 => {
                const $p: usize = 3;
                $body
            }
            4 => {
                const $p: usize = 4;
                $body
            }
            5 => {
                const $p: usize = 5;
                $body
            }
            6 => {
                const $p: usize = 6;
                $body
            }
            7 => {
                const $p: usize = 7;
                $body
            }
            d => unreachable!("spline degree {d} outside 1..=7"),
        }
    };
}

mod spline;

pub use spline::{ActiveBasis, SplineGrid, DERIV_ORDERS, MAX_DEGREE};

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::elementary::{self, Derivs};
use crate::autodiff::{Scalar, MAX_INPUT_DIM};
use crate::batch::{d1_block, d2_block, JetBatch, Layout, Order};
use crate::error::ModelError;
use crate::mlp::check_len;
use crate::params::ParamStore;

/// RNG stream reserved for KAN initialization.
const INIT_STREAM: u64 = 2;

/// Points per feature block in batched evaluation.
const POINT_BLOCK: usize = 64;

/// Standard deviation of the initial spline coefficients.
const COEFF_INIT_STD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct KanSpec {
    pub widths: Vec<usize>,
    /// Grid interval count `G`.
    pub grid_intervals: usize,
    /// Spline order `k`.
    pub order: usize,
    /// Interval the splines are defined on.
    pub spline_range: (f64, f64),
    /// Problem-domain bounds of each network input; inputs are mapped
    /// affinely onto `spline_range` before the first layer.
    pub input_bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl KanSpec {
    /// Spline range `[-1, 1]` with inputs taken from `input_bounds`.
    pub fn new(
        widths: Vec<usize>,
        grid_intervals: usize,
        order: usize,
        input_bounds: Vec<(f64, f64)>,
        seed: u64,
    ) -> Self {
        KanSpec { widths, grid_intervals, order, spline_range: (-1.0, 1.0), input_bounds, seed }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(ModelError::InvalidSpec("KAN widths need two or more positive entries".into()));
        }
        if self.order < 2 {
            return Err(ModelError::InvalidSpec(format!(
                "KAN spline order {} is not twice continuously differentiable",
                self.order
            )));
        }
        if self.input_bounds.len() != self.widths[0] {
            return Err(ModelError::Dimension { expected: self.widths[0], got: self.input_bounds.len() });
        }
        if self.input_bounds.iter().any(|&(lo, hi)| lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less)) {
            return Err(ModelError::InvalidSpec("empty input bounds".into()));
        }
        SplineGrid::new(self.spline_range.0, self.spline_range.1, self.grid_intervals, self.order).map(|_| ())
    }

    pub fn edge_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// Trainable values per edge: `G + k` spline coefficients, `c_r`, `c_B`.
    pub fn params_per_edge(&self) -> usize {
        self.grid_intervals + self.order + 2
    }
}

pub fn kan_param_count(spec: &KanSpec) -> usize {
    spec.edge_count() * spec.params_per_edge()
}

/// Borrowed parameters of one edge.
#[derive(Clone, Copy, Debug)]
pub struct KanEdge<'a, S> {
    pub c_r: S,
    pub c_b: S,
    pub coeffs: &'a [S],
}

impl<'a, S: Copy> KanEdge<'a, S> {
    /// Splits an edge slice laid out as `[c_r, c_B, c_1..c_{G+k}]`.
    pub fn from_slice(slice: &'a [S]) -> Self {
        KanEdge { c_r: slice[0], c_b: slice[1], coeffs: &slice[2..] }
    }
}

/// `c_r · silu(x) + c_B · Σ c_i B_i(x)`.
pub fn edge_activation<S: Scalar>(edge: &KanEdge<'_, S>, grid: &SplineGrid, x: S) -> S {
    let (first, basis) = grid.active_basis(x);
    let spline = spline_sum(&edge.coeffs[first..first + basis.len()], &basis, x);
    edge.c_r * x.silu() + edge.c_b * spline
}

fn spline_sum<S: Scalar>(coeffs: &[S], basis: &[S], x: S) -> S {
    coeffs.iter().zip(basis).fold(x.constant_like(0.0), |acc, (&c, &b)| acc + c * b)
}

#[derive(Clone, Debug)]
struct KanLayer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

#[derive(Clone, Debug)]
pub struct Kan {
    spec: KanSpec,
    grid: SplineGrid,
    layers: Vec<KanLayer>,
    input_affine: Vec<(f64, f64)>,
}

#[derive(Debug)]
struct LayerCache {
    input: Array2<f64>,
}

#[derive(Debug)]
pub struct KanCache {
    layout: Layout,
    layers: Vec<LayerCache>,
}

impl Kan {
    pub fn new(spec: KanSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let grid = SplineGrid::new(spec.spline_range.0, spec.spline_range.1, spec.grid_intervals, spec.order)?;
        let per_edge = spec.params_per_edge();
        let mut offset = 0;
        let layers = spec
            .widths
            .windows(2)
            .map(|w| {
                let layer = KanLayer { fan_in: w[0], fan_out: w[1], offset };
                offset += w[0] * w[1] * per_edge;
                layer
            })
            .collect();
        let (lo, hi) = spec.spline_range;
        let input_affine = spec
            .input_bounds
            .iter()
            .map(|&(a, b)| {
                let scale = (hi - lo) / (b - a);
                (scale, lo - a * scale)
            })
            .collect();
        Ok(Kan { spec, grid, layers, input_affine })
    }

    pub fn spec(&self) -> &KanSpec {
        &self.spec
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn param_count(&self) -> usize {
        kan_param_count(&self.spec)
    }

    pub fn input_dim(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    /// `(scale, shift)` per input mapping the problem domain onto the
    /// spline range.
    pub fn input_affine(&self) -> &[(f64, f64)] {
        &self.input_affine
    }

    fn edge_offset(&self, layer: &KanLayer, out: usize, inp: usize) -> usize {
        layer.offset + (out * layer.fan_in + inp) * self.spec.params_per_edge()
    }

    /// Spline coefficients ~ N(0, 0.1²), `c_B = 1`, `c_r` uniform in
    /// `±1/√fan_in`. One segment per layer, edges ordered output-major.
    pub fn init(&self) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(INIT_STREAM);
        let normal = Normal::new(0.0, COEFF_INIT_STD).unwrap();
        let nb = self.grid.num_basis();
        let mut store = ParamStore::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            let mut values = Vec::with_capacity(layer.fan_in * layer.fan_out * (nb + 2));
            for _ in 0..layer.fan_in * layer.fan_out {
                values.push(rng.random_range(-bound..bound));
                values.push(1.0);
                values.extend((0..nb).map(|_| normal.sample(&mut rng)));
            }
            store.push_segment(format!("layer{}", l + 1), values);
        }
        store
    }

    /// Pointwise evaluation over any scalar type. `x` is in problem
    /// coordinates.
    pub fn forward<S: Scalar>(&self, params: &[S], x: &[S]) -> Result<Vec<S>, ModelError> {
        check_len(self.param_count(), params.len())?;
        check_len(self.input_dim(), x.len())?;
        let per_edge = self.spec.params_per_edge();
        let mut act: Vec<S> = x.iter().zip(&self.input_affine).map(|(&xi, &(a, b))| xi * a + b).collect();
        for layer in &self.layers {
            let features: Vec<(S, usize, Vec<S>)> = act
                .iter()
                .map(|&xi| {
                    let (first, basis) = self.grid.active_basis(xi);
                    (xi.silu(), first, basis)
                })
                .collect();
            act = (0..layer.fan_out)
                .map(|j| {
                    let zero = act[0].constant_like(0.0);
                    features.iter().enumerate().fold(zero, |acc, (i, (silu, first, basis))| {
                        let off = self.edge_offset(layer, j, i);
                        let edge = KanEdge::from_slice(&params[off..off + per_edge]);
                        let spline = spline_sum(&edge.coeffs[*first..first + basis.len()], basis, *silu);
                        acc + edge.c_r * *silu + edge.c_b * spline
                    })
                })
                .collect();
        }
        Ok(act)
    }

    /// Builds the input batch for this branch (applies the input map).
    pub fn input_batch(&self, points: &[[f64; 2]], order: Order) -> JetBatch {
        JetBatch::from_points(points, self.input_dim(), order, &self.input_affine)
    }

    pub fn forward_batch(&self, params: &[f64], input: &JetBatch) -> (Array2<f64>, KanCache) {
        let layout = input.layout;
        let mut act = input.data.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let out = self.layer_forward(layer, params, &act, &layout);
            caches.push(LayerCache { input: act });
            act = out;
        }
        (act, KanCache { layout, layers: caches })
    }

    pub fn backward_batch(&self, params: &[f64], cache: &KanCache, out_bar: &Array2<f64>, grad: &mut [f64]) {
        let mut y_bar = out_bar.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.layers[l].input;
            match self.layer_backward(layer, params, input, &y_bar, &cache.layout, grad, l > 0) {
                Some(x_bar) => y_bar = x_bar,
                None => break,
            }
        }
    }

    /// Effective weights `w[j][i·F + f]`.
    fn effective_weights(&self, layer: &KanLayer, params: &[f64]) -> Array2<f64> {
        let nb = self.grid.num_basis();
        let nf = nb + 1;
        let mut w = Array2::zeros((layer.fan_out, layer.fan_in * nf));
        for j in 0..layer.fan_out {
            for i in 0..layer.fan_in {
                let off = self.edge_offset(layer, j, i);
                let c_b = params[off + 1];
                w[[j, i * nf]] = params[off];
                for m in 0..nb {
                    w[[j, i * nf + 1 + m]] = c_b * params[off + 2 + m];
                }
            }
        }
        w
    }

    fn layer_forward(&self, layer: &KanLayer, params: &[f64], input: &Array2<f64>, layout: &Layout) -> Array2<f64> {
        let n = layout.points;
        let comps = layout.components();
        let weights = self.effective_weights(layer, params);
        let mut out = Array2::zeros((layer.fan_out, layout.columns()));
        let mut block = Array2::zeros((weights.ncols(), comps * POINT_BLOCK));
        for p0 in (0..n).step_by(POINT_BLOCK) {
            let len = POINT_BLOCK.min(n - p0);
            self.fill_feature_block(layer, input, layout, p0, len, &mut block);
            for c in 0..comps {
                let features = block.slice(s![.., c * POINT_BLOCK..c * POINT_BLOCK + len]);
                let mut target = out.slice_mut(s![.., c * n + p0..c * n + p0 + len]);
                general_mat_mul(1.0, &weights, &features, 0.0, &mut target);
            }
        }
        out
    }

    /// Accumulates the layer's parameter gradient and, if `want_input`,
    /// returns the input adjoint.
    #[allow(clippy::too_many_arguments)]
    fn layer_backward(
        &self,
        layer: &KanLayer,
        params: &[f64],
        input: &Array2<f64>,
        y_bar: &Array2<f64>,
        layout: &Layout,
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let n = layout.points;
        let comps = layout.components();
        let nb = self.grid.num_basis();
        let nf = nb + 1;
        let weights = self.effective_weights(layer, params);
        let mut w_bar = Array2::zeros(weights.raw_dim());
        let mut block = Array2::zeros((weights.ncols(), comps * POINT_BLOCK));
        let mut block_bar = Array2::zeros(block.raw_dim());
        let mut x_bar = Array2::zeros(input.raw_dim());
        for p0 in (0..n).step_by(POINT_BLOCK) {
            let len = POINT_BLOCK.min(n - p0);
            self.fill_feature_block(layer, input, layout, p0, len, &mut block);
            for c in 0..comps {
                let cols = c * POINT_BLOCK..c * POINT_BLOCK + len;
                let yb = y_bar.slice(s![.., c * n + p0..c * n + p0 + len]);
                general_mat_mul(1.0, &yb, &block.slice(s![.., cols.clone()]).t(), 1.0, &mut w_bar);
                if want_input {
                    general_mat_mul(1.0, &weights.t(), &yb, 0.0, &mut block_bar.slice_mut(s![.., cols]));
                }
            }
            if want_input {
                self.feature_block_backward(layer, input, layout, p0, len, &block_bar, &mut x_bar);
            }
        }
        for j in 0..layer.fan_out {
            for i in 0..layer.fan_in {
                let off = self.edge_offset(layer, j, i);
                let row = w_bar.row(j);
                let col = i * nf;
                grad[off] += row[col];
                let c_b = params[off + 1];
                let mut gb = 0.0;
                for m in 0..nb {
                    let g = row[col + 1 + m];
                    gb += params[off + 2 + m] * g;
                    grad[off + 2 + m] += c_b * g;
                }
                grad[off + 1] += gb;
            }
        }
        want_input.then_some(x_bar)
    }

    /// Features of points `p0..p0 + len`: row `i·F + f`, column
    /// `component · POINT_BLOCK + local point`.
    fn fill_feature_block(
        &self,
        layer: &KanLayer,
        input: &Array2<f64>,
        layout: &Layout,
        p0: usize,
        len: usize,
        block: &mut Array2<f64>,
    ) {
        with_degree!(self.grid.degree(), P => self.fill_block::<P>(layer, input, layout, p0, len, block))
    }

    #[inline(always)]
    fn fill_block<const P: usize>(
        &self,
        layer: &KanLayer,
        input: &Array2<f64>,
        layout: &Layout,
        p0: usize,
        len: usize,
        block: &mut Array2<f64>,
    ) {
        let nf = self.grid.num_basis() + 1;
        let width = block.ncols();
        let (n, dim) = (layout.points, layout.dim);
        let second = layout.order == Order::Second;
        block.fill(0.0);
        let out = block.as_slice_mut().expect("standard layout");
        for i in 0..layer.fan_in {
            let x = input.row(i);
            let x = x.as_slice().expect("standard layout");
            for q in 0..len {
                let p = p0 + q;
                let jet = InputJet::read(x, n, dim, second, p);
                let mut write = |row: usize, d: &Derivs| {
                    let o = &mut out[row * width..(row + 1) * width];
                    o[q] = d[0];
                    if second {
                        for c in 0..dim {
                            o[(1 + c) * POINT_BLOCK + q] = d[1] * jet.d1[c];
                            o[(1 + dim + c) * POINT_BLOCK + q] = d[2] * jet.d1[c] * jet.d1[c] + d[1] * jet.d2[c];
                        }
                    }
                };
                write(i * nf, &elementary::silu(jet.value));
                let (first, bases) = self.grid.active_derivs::<P>(jet.value);
                for (j, d) in bases[..=P].iter().enumerate() {
                    write(i * nf + 1 + first + j, d);
                }
            }
        }
    }

    /// Adjoint of [`Kan::fill_feature_block`] with respect to the layer
    /// input, accumulated into `x_bar`.
    #[allow(clippy::too_many_arguments)]
    fn feature_block_backward(
        &self,
        layer: &KanLayer,
        input: &Array2<f64>,
        layout: &Layout,
        p0: usize,
        len: usize,
        block_bar: &Array2<f64>,
        x_bar: &mut Array2<f64>,
    ) {
        with_degree!(self.grid.degree(), P => self.block_backward::<P>(layer, input, layout, p0, len, block_bar, x_bar))
    }

    #[allow(clippy::too_many_arguments)]
    #[inline(always)]
    fn block_backward<const P: usize>(
        &self,
        layer: &KanLayer,
        input: &Array2<f64>,
        layout: &Layout,
        p0: usize,
        len: usize,
        block_bar: &Array2<f64>,
        x_bar: &mut Array2<f64>,
    ) {
        let nf = self.grid.num_basis() + 1;
        let width = block_bar.ncols();
        let (n, dim) = (layout.points, layout.dim);
        let second = layout.order == Order::Second;
        let bars = block_bar.as_slice().expect("standard layout");
        for i in 0..layer.fan_in {
            let x = input.row(i);
            let x = x.as_slice().expect("standard layout");
            let mut xb = x_bar.row_mut(i);
            let xb = xb.as_slice_mut().expect("standard layout");
            for q in 0..len {
                let p = p0 + q;
                let jet = InputJet::read(x, n, dim, second, p);
                let mut acc = InputJet::default();
                let mut read = |row: usize, &[_, f1, f2, f3]: &Derivs| {
                    let b = &bars[row * width..(row + 1) * width];
                    acc.value += b[q] * f1;
                    if second {
                        for c in 0..dim {
                            let (xd, xdd) = (jet.d1[c], jet.d2[c]);
                            let (yd, ydd) = (b[(1 + c) * POINT_BLOCK + q], b[(1 + dim + c) * POINT_BLOCK + q]);
                            acc.value += yd * f2 * xd + ydd * (f3 * xd * xd + f2 * xdd);
                            acc.d1[c] += yd * f1 + 2.0 * ydd * f2 * xd;
                            acc.d2[c] += ydd * f1;
                        }
                    }
                };
                read(i * nf, &elementary::silu(jet.value));
                let (first, bases) = self.grid.active_derivs::<P>(jet.value);
                for (j, d) in bases[..=P].iter().enumerate() {
                    read(i * nf + 1 + first + j, d);
                }
                xb[p] += acc.value;
                if second {
                    for c in 0..dim {
                        xb[d1_block(c) * n + p] += acc.d1[c];
                        xb[d2_block(layout, c) * n + p] += acc.d2[c];
                    }
                }
            }
        }
    }
}

/// One point's input jet, with pure second derivatives.
#[derive(Clone, Copy, Default)]
struct InputJet {
    value: f64,
    d1: [f64; MAX_INPUT_DIM],
    d2: [f64; MAX_INPUT_DIM],
}

impl InputJet {
    #[inline(always)]
    fn read(x: &[f64], n: usize, dim: usize, second: bool, p: usize) -> Self {
        let mut jet = InputJet { value: x[p], ..Default::default() };
        if second {
            for c in 0..dim {
                jet.d1[c] = x[(1 + c) * n + p];
                jet.d2[c] = x[(1 + dim + c) * n + p];
            }
        }
        jet
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet;

    fn spec(widths: Vec<usize>) -> KanSpec {
        let dim = widths[0];
        KanSpec::new(widths, 5, 3, vec![(-1.0, 1.0); dim], 7)
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(kan_param_count(&spec(vec![1, 30, 30, 1])), 9600);
        assert_eq!(kan_param_count(&spec(vec![2, 5, 5, 1])), 400);
        assert_eq!(kan_param_count(&spec(vec![1, 5, 5, 5, 1])), 600);
        assert_eq!(spec(vec![2, 5, 5, 1]).edge_count(), 40);
    }

    #[test]
    fn init_matches_count_and_layout() {
        let kan = Kan::new(spec(vec![2, 5, 5, 1])).unwrap();
        let store = kan.init();
        assert_eq!(store.len(), 400);
        assert_eq!(store, kan.init());
        // c_B of the first edge
        assert_eq!(store.values()[1], 1.0);
    }

    #[test]
    fn edge_activation_examples() {
        let grid = SplineGrid::new(-1.0, 1.0, 5, 3).unwrap();
        let zeros = [0.0; 8];
        let silu_only = KanEdge { c_r: 1.0, c_b: 0.0, coeffs: &zeros };
        assert_eq!(edge_activation(&silu_only, &grid, 0.0), 0.0);

        let ones = [1.0; 8];
        let spline_only = KanEdge { c_r: 0.0, c_b: 1.0, coeffs: &ones };
        for &x in &[-0.9, -0.2, 0.5, 0.99] {
            assert!((edge_activation(&spline_only, &grid, x) - 1.0).abs() < 1e-12);
        }

        let jz = [Jet::constant(0.0); 8];
        let doubled = KanEdge { c_r: Jet::constant(2.0), c_b: Jet::constant(0.0), coeffs: &jz };
        let y = edge_activation(&doubled, &grid, Jet::lift(&[0.0], 0).unwrap());
        assert!((y.d1[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_edges_give_zero_output() {
        let kan = Kan::new(spec(vec![1, 1])).unwrap();
        let params = vec![0.0; kan.param_count()];
        for &x in &[-0.5, 0.0, 0.7] {
            assert_eq!(kan.forward(&params, &[x]).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn rejects_low_order_and_bad_bounds() {
        let mut s = spec(vec![1, 2, 1]);
        s.order = 1;
        assert!(Kan::new(s).is_err());
        let mut s = spec(vec![2, 2, 1]);
        s.input_bounds.pop();
        assert!(Kan::new(s).is_err());
    }
}
