//! Fully connected perceptron branch.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::elementary::{self, Derivs};
use crate::autodiff::Scalar;
use crate::batch::{self, JetBatch, Layout};
use crate::error::ModelError;
use crate::params::ParamStore;

/// RNG stream reserved for perceptron initialization.
const INIT_STREAM: u64 = 1;

/// Hidden-layer nonlinearity. Both choices are smooth, as second-order
/// residuals require.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Sin,
}

impl Activation {
    pub fn derivs(self, x: f64) -> Derivs {
        match self {
            Activation::Tanh => elementary::tanh(x),
            Activation::Sin => elementary::sin(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, seed: u64) -> Self {
        MlpSpec { widths, activation: Activation::Tanh, seed }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.widths.len() < 2 {
            return Err(ModelError::InvalidSpec("perceptron needs at least an input and an output width".into()));
        }
        if self.widths.contains(&0) {
            return Err(ModelError::InvalidSpec("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Exact parameter count: weights plus biases of every affine layer.
pub fn mlp_param_count(spec: &MlpSpec) -> usize {
    spec.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Clone, Debug)]
struct Dense {
    fan_in: usize,
    fan_out: usize,
    weight: Range<usize>,
    bias: Range<usize>,
}

#[derive(Clone, Debug)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Dense>,
}

/// Intermediate values kept from a batched forward pass.
#[derive(Debug)]
pub struct MlpCache {
    layout: Layout,
    /// Input of each affine layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
    /// Activation derivatives at each hidden pre-activation, neuron-major.
    derivs: Vec<Vec<Derivs>>,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut offset = 0;
        let layers = spec
            .widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weight = offset..offset + fan_in * fan_out;
                let bias = weight.end..weight.end + fan_out;
                offset = bias.end;
                Dense { fan_in, fan_out, weight, bias }
            })
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias.end)
    }

    pub fn input_dim(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(INIT_STREAM);
        let mut store = ParamStore::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            let weights: Vec<f64> =
                (0..layer.fan_in * layer.fan_out).map(|_| rng.random_range(-limit..limit)).collect();
            store.push_segment(format!("W{}", l + 1), weights);
            store.push_segment(format!("b{}", l + 1), vec![0.0; layer.fan_out]);
        }
        store
    }

    /// Pointwise evaluation over any scalar type. Weights are row-major
    /// `fan_out x fan_in`; the last layer is affine only.
    pub fn forward<S: Scalar>(&self, params: &[S], x: &[S]) -> Result<Vec<S>, ModelError> {
        check_len(self.param_count(), params.len())?;
        check_len(self.input_dim(), x.len())?;
        let mut act = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let w = &params[layer.weight.clone()];
            let b = &params[layer.bias.clone()];
            act = (0..layer.fan_out)
                .map(|j| {
                    let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                    let z = row.iter().zip(&act).fold(b[j], |acc, (&wi, &ai)| acc + wi * ai);
                    if l == last {
                        z
                    } else {
                        z.chain(self.spec.activation.derivs(z.value()))
                    }
                })
                .collect();
        }
        Ok(act)
    }

    pub fn forward_batch(&self, params: &[f64], input: &JetBatch) -> (Array2<f64>, MlpCache) {
        let layout = input.layout;
        let n = layout.points;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut act = input.data.clone();
        let last = self.layers.len() - 1;
        let mut all_derivs = Vec::with_capacity(self.layers.len() - 1);
        for (l, layer) in self.layers.iter().enumerate() {
            let w = ArrayView2::from_shape((layer.fan_out, layer.fan_in), &params[layer.weight.clone()]).unwrap();
            let mut z = Array2::zeros((layer.fan_out, layout.columns()));
            general_mat_mul(1.0, &w, &act, 0.0, &mut z);
            let bias = ArrayView1::from(&params[layer.bias.clone()]);
            for (mut row, &b) in z.rows_mut().into_iter().zip(bias.iter()) {
                row.slice_mut(s![..n]).mapv_inplace(|v| v + b);
            }
            inputs.push(act);
            if l == last {
                return (z, MlpCache { layout, inputs, pre, derivs: all_derivs });
            }
            let mut next = Array2::zeros(z.raw_dim());
            let mut derivs = vec![[0.0; 4]; layer.fan_out * n];
            for ((zr, mut out), d) in z.rows().into_iter().zip(next.rows_mut()).zip(derivs.chunks_mut(n)) {
                let zr = zr.as_slice().unwrap();
                for (d, &v) in d.iter_mut().zip(&zr[..n]) {
                    *d = self.spec.activation.derivs(v);
                }
                batch::unary_forward(&layout, zr, out.as_slice_mut().unwrap(), d);
            }
            all_derivs.push(derivs);
            pre.push(z);
            act = next;
        }
        unreachable!("perceptron has at least one layer")
    }

    /// Accumulates parameter gradients into `grad` given the adjoint of the
    /// batched output.
    pub fn backward_batch(&self, params: &[f64], cache: &MlpCache, out_bar: &Array2<f64>, grad: &mut [f64]) {
        let layout = cache.layout;
        let n = layout.points;
        let mut z_bar = out_bar.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            {
                let mut gw =
                    ArrayViewMut2::from_shape((layer.fan_out, layer.fan_in), &mut grad[layer.weight.clone()]).unwrap();
                general_mat_mul(1.0, &z_bar, &cache.inputs[l].t(), 1.0, &mut gw);
            }
            for (gb, row) in grad[layer.bias.clone()].iter_mut().zip(z_bar.rows()) {
                *gb += row.slice(s![..n]).sum();
            }
            if l == 0 {
                break;
            }
            let w = ArrayView2::from_shape((layer.fan_out, layer.fan_in), &params[layer.weight.clone()]).unwrap();
            let a_bar = w.t().dot(&z_bar);
            let z_prev = &cache.pre[l - 1];
            let mut prev_bar = Array2::zeros(z_prev.raw_dim());
            let rows = z_prev.rows().into_iter().zip(a_bar.rows()).zip(prev_bar.rows_mut());
            for (((zr, ar), mut out), d) in rows.zip(cache.derivs[l - 1].chunks(n)) {
                batch::unary_backward(
                    &layout,
                    zr.as_slice().unwrap(),
                    ar.as_slice().unwrap(),
                    out.as_slice_mut().unwrap(),
                    d,
                );
            }
            z_bar = prev_bar;
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Dimension { expected, got })
    }
}
