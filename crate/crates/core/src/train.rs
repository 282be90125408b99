//! Full-batch Adam training with an optional step learning-rate decay.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::pinn::{LossParts, LossWeights, Objective};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite gradient component {index} at step {step}")]
    NonFiniteGradient { step: usize, index: usize },
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String, history: Box<TrainHistory> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Scheduler {
    #[default]
    None,
    Step {
        period: usize,
        gamma: f64,
    },
}

impl Scheduler {
    pub fn lr(&self, epoch: usize, base_lr: f64) -> f64 {
        match *self {
            Scheduler::None => base_lr,
            Scheduler::Step { period, gamma } => step_lr(epoch, base_lr, period, gamma),
        }
    }
}

/// `base_lr · γ^⌊epoch / period⌋`.
pub fn step_lr(epoch: usize, base_lr: f64, period: usize, gamma: f64) -> f64 {
    base_lr * gamma.powi((epoch / period.max(1)) as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub scheduler: Scheduler,
    pub seed: u64,
    pub weights: LossWeights,
    pub n_residual: usize,
    pub n_initial: usize,
    pub n_boundary: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            iterations: 15_000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            scheduler: Scheduler::None,
            seed: 0,
            weights: LossWeights::default(),
            n_residual: 2000,
            n_initial: 500,
            n_boundary: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Config(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if let Scheduler::Step { period, gamma } = self.scheduler {
            if period == 0 {
                return bad("scheduler period must be at least 1");
            }
            if !(gamma > 0.0 && gamma <= 1.0) {
                return bad("scheduler gamma must lie in (0, 1]");
            }
        }
        self.weights.validate().map_err(|e| TrainError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0, beta1, beta2, epsilon }
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient
/// component is non-finite.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<(), TrainError> {
    let n = params.len();
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(TrainError::Length { expected: n, got: len });
        }
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { step: state.step, index });
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    /// Loss before the update of each epoch.
    pub losses: Vec<f64>,
    pub lrs: Vec<f64>,
    pub params: Vec<f64>,
    /// Loss components at the final parameters.
    pub final_parts: LossParts,
    pub seconds: f64,
}

/// Runs `config.iterations` full-batch Adam epochs from `initial`.
pub fn train(objective: &dyn Objective, initial: Vec<f64>, config: &TrainConfig) -> Result<TrainHistory, TrainError> {
    config.validate()?;
    let n = objective.param_count();
    if initial.len() != n {
        return Err(TrainError::Length { expected: n, got: initial.len() });
    }
    let start = Instant::now();
    let mut params = initial;
    let mut grad = vec![0.0; n];
    let mut state = AdamState::new(n, config.beta1, config.beta2, config.epsilon);
    let mut history = TrainHistory {
        losses: Vec::with_capacity(config.iterations),
        lrs: Vec::with_capacity(config.iterations),
        ..Default::default()
    };
    let diverged = |epoch: usize, reason: String, mut history: TrainHistory, params: Vec<f64>, start: Instant| {
        history.params = params;
        history.seconds = start.elapsed().as_secs_f64();
        TrainError::Diverged { epoch, reason, history: Box::new(history) }
    };
    for epoch in 0..config.iterations {
        grad.fill(0.0);
        let parts = objective.loss_and_grad(&params, &mut grad);
        if !parts.total.is_finite() {
            return Err(diverged(epoch, format!("loss is {}", parts.total), history, params, start));
        }
        let lr = config.scheduler.lr(epoch, config.learning_rate);
        history.losses.push(parts.total);
        history.lrs.push(lr);
        if let Err(e) = adam_step(&mut params, &grad, &mut state, lr) {
            return Err(diverged(epoch, e.to_string(), history, params, start));
        }
    }
    history.final_parts = objective.loss_and_grad(&params, &mut grad);
    history.params = params;
    history.seconds = start.elapsed().as_secs_f64();
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        target: f64,
    }

    impl Objective for Quadratic {
        fn param_count(&self) -> usize {
            1
        }
        fn loss_and_grad(&self, p: &[f64], g: &mut [f64]) -> LossParts {
            let d = p[0] - self.target;
            g[0] += 2.0 * d;
            LossParts { total: d * d, ..Default::default() }
        }
    }

    #[test]
    fn first_adam_step() {
        let mut p = [0.5, 0.0, 0.0];
        let mut s = AdamState::new(3, 0.9, 0.999, 1e-8);
        adam_step(&mut p, &[1.0, 1.0, -1.0], &mut s, 1e-3).unwrap();
        assert!((p[0] - (0.5 - 1e-3)).abs() < 1e-10);
        assert_eq!(p[1], -p[2]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = [0.25, -3.0];
        let mut s = AdamState::new(2, 0.9, 0.999, 1e-8);
        for _ in 0..10 {
            adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap();
        }
        assert_eq!(p, [0.25, -3.0]);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = [1.0, 2.0];
        let mut s = AdamState::new(2, 0.9, 0.999, 1e-8);
        let err = adam_step(&mut p, &[0.0, f64::NAN], &mut s, 0.1).unwrap_err();
        assert_eq!(err, TrainError::NonFiniteGradient { step: 0, index: 1 });
        assert_eq!(p, [1.0, 2.0]);
    }

    #[test]
    fn schedule_values() {
        assert_eq!(step_lr(999, 1e-3, 1000, 0.75), 1e-3);
        assert_eq!(step_lr(1000, 1e-3, 1000, 0.75), 0.75e-3);
        assert!((step_lr(3000, 1.0, 1000, 0.75) - 0.421875).abs() < 1e-15);
    }

    #[test]
    fn quadratic_converges() {
        let config = TrainConfig { learning_rate: 0.01, iterations: 5000, ..Default::default() };
        let h = train(&Quadratic { target: 1.7 }, vec![-2.0], &config).unwrap();
        assert!((h.params[0] - 1.7).abs() < 1e-6, "{}", h.params[0]);
    }

    #[test]
    fn history_follows_scheduler() {
        let scheduler = Scheduler::Step { period: 7, gamma: 0.5 };
        let config = TrainConfig { learning_rate: 0.1, iterations: 30, scheduler, ..Default::default() };
        let h = train(&Quadratic { target: 0.0 }, vec![1.0], &config).unwrap();
        assert_eq!(h.losses.len(), 30);
        for (e, lr) in h.lrs.iter().enumerate() {
            assert_eq!(*lr, step_lr(e, 0.1, 7, 0.5));
        }
    }

    #[test]
    fn zero_iterations_keep_initial_params() {
        let config = TrainConfig { iterations: 0, ..Default::default() };
        let h = train(&Quadratic { target: 0.0 }, vec![0.3], &config).unwrap();
        assert!(h.losses.is_empty());
        assert_eq!(h.params, vec![0.3]);
    }

    #[test]
    fn divergence_keeps_history() {
        struct Blowup;
        impl Objective for Blowup {
            fn param_count(&self) -> usize {
                1
            }
            fn loss_and_grad(&self, p: &[f64], g: &mut [f64]) -> LossParts {
                g[0] -= 1.0;
                LossParts { total: if p[0] > 0.05 { f64::INFINITY } else { -p[0] }, ..Default::default() }
            }
        }
        let config = TrainConfig { learning_rate: 0.01, iterations: 100, ..Default::default() };
        match train(&Blowup, vec![0.0], &config) {
            Err(TrainError::Diverged { epoch, history, .. }) => {
                assert_eq!(history.losses.len(), epoch);
                assert!(epoch > 0 && epoch < 100);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { beta1: 1.0, ..Default::default() },
            TrainConfig { scheduler: Scheduler::Step { period: 0, gamma: 0.5 }, ..Default::default() },
            TrainConfig { scheduler: Scheduler::Step { period: 10, gamma: 1.5 }, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
