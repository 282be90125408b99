//! Loss assembly.
//!
//! The generic functions build each loss as a differentiable scalar from
//! pointwise network evaluations; with [`crate::autodiff::Var`] they yield
//! exact parameter gradients through [`crate::autodiff::param_gradient`].
//! [`PinnObjective`] and [`SupervisedObjective`] compute the same losses
//! over whole batches with a hand-written reverse pass and are what the
//! training loop uses.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::JetScalar;
use crate::batch::Order;
use crate::error::ModelError;
use crate::hybrid::Network;
use crate::problems::{PdeProblem, ProblemError};
use crate::sample::{self, PointSet, SampleError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PinnError {
    #[error("empty {0} point set")]
    EmptyPoints(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("loss weights must be finite, non-negative and not all zero")]
    Weights,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub ic: f64,
    pub bc: f64,
    pub residual: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { ic: 1.0, bc: 1.0, residual: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), PinnError> {
        let w = [self.ic, self.bc, self.residual];
        if w.iter().all(|v| v.is_finite() && *v >= 0.0) && w.iter().any(|v| *v > 0.0) {
            Ok(())
        } else {
            Err(PinnError::Weights)
        }
    }
}

/// Training points for one PDE run.
#[derive(Clone, Debug)]
pub struct CollocationSet {
    pub residual: PointSet,
    pub initial: Option<PointSet>,
    pub boundary: PointSet,
}

impl CollocationSet {
    /// Sobol residual and boundary points; initial points only when the
    /// problem has an initial condition.
    pub fn sample(
        problem: &PdeProblem,
        n_residual: usize,
        n_initial: usize,
        n_boundary: usize,
    ) -> Result<Self, PinnError> {
        Ok(CollocationSet {
            residual: sample::residual_points(problem, n_residual)?,
            initial: match problem.initial {
                Some(_) => Some(sample::initial_points(problem, n_initial)?),
                None => None,
            },
            boundary: sample::boundary_points(problem, n_boundary)?,
        })
    }
}

fn lift<S: JetScalar>(ctx: &S, point: &[f64]) -> Vec<S> {
    (0..point.len()).map(|i| ctx.input_like(point, i)).collect()
}

fn mean_square<S: JetScalar>(terms: impl IntoIterator<Item = S>, n: usize) -> Option<S> {
    let sum = terms.into_iter().map(|e| e * e).reduce(|a, b| a + b)?;
    Some(sum / n as f64)
}

fn output<S: JetScalar>(net: &Network, params: &[S], point: &[f64]) -> Result<S, ModelError> {
    Ok(net.forward(params, &lift(&params[0], point))?[0])
}

/// `(1/N) Σ |u(x, 0) − g(x)|²` over the initial points.
pub fn loss_ic<S: JetScalar>(
    net: &Network,
    params: &[S],
    problem: &PdeProblem,
    points: &PointSet,
) -> Result<S, PinnError> {
    let terms = points
        .iter()
        .map(|p| Ok(output(net, params, p)? - problem.initial_value(p)?))
        .collect::<Result<Vec<S>, PinnError>>()?;
    mean_square(terms, points.len()).ok_or(PinnError::EmptyPoints("initial"))
}

/// `(1/N) Σ |u − u_prescribed|²` over all boundary points, whatever their
/// segment.
pub fn loss_bc<S: JetScalar>(
    net: &Network,
    params: &[S],
    problem: &PdeProblem,
    points: &PointSet,
) -> Result<S, PinnError> {
    let terms = points
        .iter()
        .zip(&points.tags)
        .map(|(p, &tag)| Ok(output(net, params, p)? - (problem.boundaries[tag].prescribed)(p)))
        .collect::<Result<Vec<S>, PinnError>>()?;
    mean_square(terms, points.len()).ok_or(PinnError::EmptyPoints("boundary"))
}

/// `(1/N) Σ |r(x)|²` with `r` the problem's residual operator applied to
/// the network jet.
pub fn loss_residual<S: JetScalar>(
    net: &Network,
    params: &[S],
    problem: &PdeProblem,
    points: &PointSet,
) -> Result<S, PinnError> {
    let terms = points
        .iter()
        .map(|p| Ok(problem.residual(output(net, params, p)?, p)))
        .collect::<Result<Vec<S>, PinnError>>()?;
    mean_square(terms, points.len()).ok_or(PinnError::EmptyPoints("residual"))
}

/// `λ_BC L_BC + λ_IC L_IC + λ_R L_R`; the initial term is absent for
/// stationary problems.
pub fn total_loss<S: JetScalar>(
    net: &Network,
    params: &[S],
    problem: &PdeProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
) -> Result<S, PinnError> {
    weights.validate()?;
    let mut total = loss_bc(net, params, problem, &colloc.boundary)? * weights.bc;
    if let Some(initial) = &colloc.initial {
        total = total + loss_ic(net, params, problem, initial)? * weights.ic;
    }
    Ok(total + loss_residual(net, params, problem, &colloc.residual)? * weights.residual)
}

/// `(1/N) Σ (u(x) − y)²`.
pub fn supervised_mse<S: JetScalar>(net: &Network, params: &[S], targets: &[(f64, f64)]) -> Result<S, PinnError> {
    let terms =
        targets.iter().map(|&(x, y)| Ok(output(net, params, &[x])? - y)).collect::<Result<Vec<S>, PinnError>>()?;
    mean_square(terms, targets.len()).ok_or(PinnError::EmptyPoints("target"))
}

/// Loss components of one evaluation. Components that do not apply are 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub ic: f64,
    pub bc: f64,
    pub residual: f64,
}

/// A scalar training objective over a flat parameter vector.
pub trait Objective {
    fn param_count(&self) -> usize;

    /// Loss at `params`, accumulating its gradient into `grad`.
    fn loss_and_grad(&self, params: &[f64], grad: &mut [f64]) -> LossParts;
}

/// Value-only points with a target per point; shared by the BC, IC and
/// supervised terms.
#[derive(Clone, Debug)]
struct ValueTerm {
    points: Vec<[f64; 2]>,
    targets: Vec<f64>,
}

impl ValueTerm {
    /// Mean squared mismatch; adds `weight · ∂/∂θ` into `grad`.
    fn eval(&self, net: &Network, params: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
        let (y, cache) = net.forward_batch(params, &self.points, Order::Value);
        let n = self.points.len() as f64;
        let err: Vec<f64> = y.row(0).iter().zip(&self.targets).map(|(u, t)| u - t).collect();
        let loss = err.iter().map(|e| e * e).sum::<f64>() / n;
        if weight != 0.0 {
            let bar = Array2::from_shape_fn((1, err.len()), |(_, p)| weight * 2.0 * err[p] / n);
            net.backward_batch(params, &cache, &bar, grad);
        }
        loss
    }
}

/// Batched physics-informed objective for one problem and point set.
#[derive(Clone, Debug)]
pub struct PinnObjective<'a> {
    net: &'a Network,
    dim: usize,
    weights: LossWeights,
    residual_points: Vec<[f64; 2]>,
    forcing: Vec<f64>,
    coefficients: Vec<f64>,
    boundary: ValueTerm,
    initial: Option<ValueTerm>,
}

impl<'a> PinnObjective<'a> {
    pub fn new(
        net: &'a Network,
        problem: &PdeProblem,
        colloc: &CollocationSet,
        weights: LossWeights,
    ) -> Result<Self, PinnError> {
        weights.validate()?;
        if net.input_dim() != problem.dim() {
            return Err(ModelError::Dimension { expected: problem.dim(), got: net.input_dim() }.into());
        }
        if colloc.residual.is_empty() {
            return Err(PinnError::EmptyPoints("residual"));
        }
        if colloc.boundary.is_empty() {
            return Err(PinnError::EmptyPoints("boundary"));
        }
        let boundary = ValueTerm {
            points: colloc.boundary.points.clone(),
            targets: colloc
                .boundary
                .iter()
                .zip(&colloc.boundary.tags)
                .map(|(p, &tag)| (problem.boundaries[tag].prescribed)(p))
                .collect(),
        };
        let initial = match &colloc.initial {
            Some(set) if problem.initial.is_some() => {
                if set.is_empty() {
                    return Err(PinnError::EmptyPoints("initial"));
                }
                Some(ValueTerm {
                    points: set.points.clone(),
                    targets: set.iter().map(|p| problem.initial_value(p)).collect::<Result<_, _>>()?,
                })
            }
            _ => None,
        };
        Ok(PinnObjective {
            net,
            dim: problem.dim(),
            weights,
            residual_points: colloc.residual.points.clone(),
            forcing: colloc.residual.iter().map(|p| (problem.forcing)(p)).collect(),
            coefficients: problem.operator.component_coefficients(problem.dim()),
            boundary,
            initial,
        })
    }

    fn residual_term(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (y, cache) = self.net.forward_batch(params, &self.residual_points, Order::Second);
        let n = self.residual_points.len();
        let y = y.row(0);
        let mut r = self.forcing.iter().map(|f| -f).collect::<Vec<f64>>();
        for (comp, &coef) in self.coefficients.iter().enumerate() {
            if coef != 0.0 {
                for (p, rp) in r.iter_mut().enumerate() {
                    *rp += coef * y[comp * n + p];
                }
            }
        }
        let loss = r.iter().map(|v| v * v).sum::<f64>() / n as f64;
        if self.weights.residual != 0.0 {
            let mut bar = Array2::zeros((1, (1 + 2 * self.dim) * n));
            let scale = self.weights.residual * 2.0 / n as f64;
            for (comp, &coef) in self.coefficients.iter().enumerate() {
                if coef != 0.0 {
                    for (p, rp) in r.iter().enumerate() {
                        bar[[0, comp * n + p]] = scale * coef * rp;
                    }
                }
            }
            self.net.backward_batch(params, &cache, &bar, grad);
        }
        loss
    }
}

impl Objective for PinnObjective<'_> {
    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn loss_and_grad(&self, params: &[f64], grad: &mut [f64]) -> LossParts {
        let w = self.weights;
        let bc = self.boundary.eval(self.net, params, w.bc, grad);
        let ic = match &self.initial {
            Some(term) => term.eval(self.net, params, w.ic, grad),
            None => 0.0,
        };
        let residual = self.residual_term(params, grad);
        let ic_weight = if self.initial.is_some() { w.ic } else { 0.0 };
        LossParts { total: w.bc * bc + ic_weight * ic + w.residual * residual, ic, bc, residual }
    }
}

/// Batched mean-squared-error fit to `(x, y)` samples.
#[derive(Clone, Debug)]
pub struct SupervisedObjective<'a> {
    net: &'a Network,
    term: ValueTerm,
}

impl<'a> SupervisedObjective<'a> {
    pub fn new(net: &'a Network, targets: &[(f64, f64)]) -> Result<Self, PinnError> {
        if targets.is_empty() {
            return Err(PinnError::EmptyPoints("target"));
        }
        if net.input_dim() != 1 {
            return Err(ModelError::Dimension { expected: 1, got: net.input_dim() }.into());
        }
        let term = ValueTerm {
            points: targets.iter().map(|&(x, _)| [x, 0.0]).collect(),
            targets: targets.iter().map(|&(_, y)| y).collect(),
        };
        Ok(SupervisedObjective { net, term })
    }
}

impl Objective for SupervisedObjective<'_> {
    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn loss_and_grad(&self, params: &[f64], grad: &mut [f64]) -> LossParts {
        let loss = self.term.eval(self.net, params, 1.0, grad);
        LossParts { total: loss, ..Default::default() }
    }
}
