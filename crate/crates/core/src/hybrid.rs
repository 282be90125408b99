//! Parallel KAN/MLP fusion `u = ξ·KAN(x) + (1 − ξ)·MLP(x)`.

use std::ops::Range;

use ndarray::Array2;

use crate::autodiff::Scalar;
use crate::batch::{JetBatch, Order};
use crate::error::ModelError;
use crate::kan::{Kan, KanCache};
use crate::mlp::{check_len, Mlp, MlpCache};
use crate::params::ParamStore;

/// Two branches on shared inputs. The flat parameter vector is the KAN
/// segment followed by the MLP segment. `ξ` is a fixed hyperparameter.
#[derive(Clone, Debug)]
pub struct HpkmModel {
    kan: Kan,
    mlp: Mlp,
    xi: f64,
}

impl HpkmModel {
    pub fn new(kan: Kan, mlp: Mlp, xi: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(ModelError::InvalidSpec(format!("scaling factor {xi} outside [0, 1]")));
        }
        check_len(kan.input_dim(), mlp.input_dim())?;
        check_len(kan.output_dim(), mlp.output_dim())?;
        Ok(HpkmModel { kan, mlp, xi })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn kan(&self) -> &Kan {
        &self.kan
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Index ranges of the KAN and MLP segments in the flat vector.
    pub fn param_partition(&self) -> (Range<usize>, Range<usize>) {
        let nk = self.kan.param_count();
        (0..nk, nk..nk + self.mlp.param_count())
    }

    pub fn forward<S: Scalar>(&self, params: &[S], x: &[S]) -> Result<Vec<S>, ModelError> {
        check_len(self.kan.param_count() + self.mlp.param_count(), params.len())?;
        let (k, m) = self.param_partition();
        let yk = self.kan.forward(&params[k], x)?;
        let ym = self.mlp.forward(&params[m], x)?;
        Ok(yk.into_iter().zip(ym).map(|(a, b)| self.fuse(a, b)).collect())
    }

    fn fuse<S: Scalar>(&self, kan: S, mlp: S) -> S {
        kan * self.xi + mlp * (1.0 - self.xi)
    }
}

/// Any of the three architectures compared in the experiments.
#[derive(Clone, Debug)]
pub enum Network {
    Mlp(Mlp),
    Kan(Kan),
    Hybrid(HpkmModel),
}

#[derive(Debug)]
pub enum NetworkCache {
    Mlp(MlpCache),
    Kan(KanCache),
    Hybrid(KanCache, MlpCache),
}

impl Network {
    pub fn param_count(&self) -> usize {
        match self {
            Network::Mlp(m) => m.param_count(),
            Network::Kan(k) => k.param_count(),
            Network::Hybrid(h) => h.kan.param_count() + h.mlp.param_count(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Network::Mlp(m) => m.input_dim(),
            Network::Kan(k) => k.input_dim(),
            Network::Hybrid(h) => h.kan.input_dim(),
        }
    }

    /// Fresh parameters. Each branch draws from its own seeded stream, so
    /// a branch initializes identically alone or inside a hybrid.
    pub fn init(&self) -> ParamStore {
        match self {
            Network::Mlp(m) => m.init(),
            Network::Kan(k) => k.init(),
            Network::Hybrid(h) => {
                let mut store = ParamStore::new();
                store.append("kan", h.kan.init());
                store.append("mlp", h.mlp.init());
                store
            }
        }
    }

    pub fn forward<S: Scalar>(&self, params: &[S], x: &[S]) -> Result<Vec<S>, ModelError> {
        match self {
            Network::Mlp(m) => m.forward(params, x),
            Network::Kan(k) => k.forward(params, x),
            Network::Hybrid(h) => h.forward(params, x),
        }
    }

    /// Scalar output at a batch of points, with jets up to `order`.
    /// Returns a single row laid out like [`JetBatch`].
    pub fn forward_batch(&self, params: &[f64], points: &[[f64; 2]], order: Order) -> (Array2<f64>, NetworkCache) {
        let dim = self.input_dim();
        let raw = || JetBatch::from_points(points, dim, order, &vec![(1.0, 0.0); dim]);
        match self {
            Network::Mlp(m) => {
                let (y, c) = m.forward_batch(params, &raw());
                (y, NetworkCache::Mlp(c))
            }
            Network::Kan(k) => {
                let (y, c) = k.forward_batch(params, &k.input_batch(points, order));
                (y, NetworkCache::Kan(c))
            }
            Network::Hybrid(h) => {
                let (kr, mr) = h.param_partition();
                let (yk, ck) = h.kan.forward_batch(&params[kr], &h.kan.input_batch(points, order));
                let (ym, cm) = h.mlp.forward_batch(&params[mr], &raw());
                let y = yk * h.xi + ym * (1.0 - h.xi);
                (y, NetworkCache::Hybrid(ck, cm))
            }
        }
    }

    /// Accumulates `∂loss/∂θ` into `grad` given the output adjoint.
    pub fn backward_batch(&self, params: &[f64], cache: &NetworkCache, out_bar: &Array2<f64>, grad: &mut [f64]) {
        match (self, cache) {
            (Network::Mlp(m), NetworkCache::Mlp(c)) => m.backward_batch(params, c, out_bar, grad),
            (Network::Kan(k), NetworkCache::Kan(c)) => k.backward_batch(params, c, out_bar, grad),
            (Network::Hybrid(h), NetworkCache::Hybrid(ck, cm)) => {
                let (kr, mr) = h.param_partition();
                let kan_bar = out_bar * h.xi;
                let mlp_bar = out_bar * (1.0 - h.xi);
                h.kan.backward_batch(&params[kr.clone()], ck, &kan_bar, &mut grad[kr]);
                h.mlp.backward_batch(&params[mr.clone()], cm, &mlp_bar, &mut grad[mr]);
            }
            _ => panic!("cache does not belong to this network"),
        }
    }

    /// Plain values at `points`.
    pub fn predict(&self, params: &[f64], points: &[[f64; 2]]) -> Vec<f64> {
        let (y, _) = self.forward_batch(params, points, Order::Value);
        y.row(0).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kan::KanSpec;
    use crate::mlp::MlpSpec;

    fn branches(seed: u64) -> (Kan, Mlp) {
        let kan = Kan::new(KanSpec::new(vec![1, 3, 1], 5, 3, vec![(-2.0, 2.0)], seed)).unwrap();
        let mlp = Mlp::new(MlpSpec::new(vec![1, 6, 1], seed)).unwrap();
        (kan, mlp)
    }

    #[test]
    fn endpoints_reduce_to_single_branch() {
        let (kan, mlp) = branches(3);
        let pk = kan.init();
        let pm = mlp.init();
        for (xi, expect_kan) in [(0.0, false), (1.0, true)] {
            let net = Network::Hybrid(HpkmModel::new(kan.clone(), mlp.clone(), xi).unwrap());
            let params = net.init();
            let points = [[0.3, 0.0], [-1.1, 0.0]];
            let fused = net.predict(params.values(), &points);
            let single = if expect_kan {
                Network::Kan(kan.clone()).predict(pk.values(), &points)
            } else {
                Network::Mlp(mlp.clone()).predict(pm.values(), &points)
            };
            assert_eq!(fused, single);
        }
    }

    #[test]
    fn fusion_arithmetic() {
        let (kan, mlp) = branches(1);
        let h = HpkmModel::new(kan, mlp, 0.3).unwrap();
        assert!((h.fuse(2.0, 1.0) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn partition_sizes_and_validation() {
        let (kan, mlp) = branches(1);
        let h = HpkmModel::new(kan.clone(), mlp.clone(), 0.5).unwrap();
        let (k, m) = h.param_partition();
        assert_eq!((k.len(), m.len()), (kan.param_count(), mlp.param_count()));
        assert!(HpkmModel::new(kan, mlp, 1.5).is_err());
    }
}
