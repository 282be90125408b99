//! Experiment configuration. A config file names a task and overrides any
//! subset of the task's defaults; [`ExperimentConfig::resolve`] fills in
//! the rest.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::mlp::Activation;
use crate::pinn::LossWeights;
use crate::problems::{self, ProblemKind};
use crate::train::{Scheduler, TrainConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config does not name a problem")]
    MissingProblem,
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
}

/// What a run learns: the mixed-frequency function or one of the PDEs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Task {
    Fit,
    Pde(ProblemKind),
}

impl Task {
    pub const FIT_NAME: &'static str = "fit";

    pub fn name(self) -> &'static str {
        match self {
            Task::Fit => Self::FIT_NAME,
            Task::Pde(kind) => kind.name(),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Task::Fit | Task::Pde(ProblemKind::Poisson) => 1,
            Task::Pde(_) => 2,
        }
    }

    /// Name of the second coordinate in field tables.
    pub fn second_axis(self) -> &'static str {
        match self {
            Task::Pde(ProblemKind::Advection | ProblemKind::ConvectionDiffusion) => "t",
            _ => "y",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == Self::FIT_NAME {
            return Ok(Task::Fit);
        }
        s.parse().map(Task::Pde).map_err(|_| ConfigError::UnknownProblem(s.to_string()))
    }
}

impl TryFrom<String> for Task {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Task> for String {
    fn from(t: Task) -> String {
        t.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mlp_widths: Vec<usize>,
    pub mlp_activation: Activation,
    pub kan_widths: Vec<usize>,
    pub grid_intervals: usize,
    pub spline_order: usize,
    /// Weight of the KAN branch.
    pub xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub scheduler: Scheduler,
    pub seeds: Vec<u64>,
    pub weights: LossWeights,
    pub n_residual: usize,
    pub n_initial: usize,
    pub n_boundary: usize,
    /// Training samples for the function fit.
    pub n_samples: usize,
}

impl TrainSection {
    pub fn for_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            scheduler: self.scheduler,
            seed,
            weights: self.weights,
            n_residual: self.n_residual,
            n_initial: self.n_initial,
            n_boundary: self.n_boundary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub xi_grid: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
    /// Mixing ratios compared in the noise study.
    pub noise_xis: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    /// Uniform test points per axis.
    pub points_per_axis: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Task,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub evaluation: EvaluationSection,
    pub out_dir: PathBuf,
    /// Record wall-clock seconds in result tables; zero otherwise.
    pub record_timing: bool,
}

pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];
pub const DEFAULT_NOISE_SIGMAS: [f64; 5] = [0.0, 0.01, 0.02, 0.05, 0.1];

/// `0, 0.1, …, 1`.
pub fn default_xi_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl ExperimentConfig {
    /// Fully specified defaults for `task`.
    pub fn defaults(task: Task) -> Self {
        let (mlp_widths, kan_widths, xi) = match task {
            Task::Fit => (vec![1, 100, 100, 100, 100, 1], vec![1, 5, 5, 5, 1], 0.9),
            Task::Pde(ProblemKind::Poisson) => (vec![1, 20, 20, 1], vec![1, 30, 30, 1], 0.3),
            Task::Pde(kind) => {
                let xi = match kind {
                    ProblemKind::Advection => 0.7,
                    ProblemKind::ConvectionDiffusion => 0.2,
                    _ => 0.9,
                };
                (vec![2, 20, 20, 20, 1], vec![2, 5, 5, 1], xi)
            }
        };
        let scheduler = match task {
            Task::Fit | Task::Pde(ProblemKind::Poisson) => Scheduler::None,
            Task::Pde(_) => Scheduler::Step { period: 1000, gamma: 0.75 },
        };
        let (learning_rate, iterations) = match task {
            Task::Fit => (0.01, 10_000),
            Task::Pde(_) => (1e-3, 15_000),
        };
        let (n_residual, n_initial, n_boundary) = match task {
            Task::Fit => (0, 0, 0),
            Task::Pde(kind) if kind.is_time_dependent() => (2000, 500, 500),
            Task::Pde(_) => (2000, 0, 500),
        };
        ExperimentConfig {
            problem: task,
            model: ModelConfig {
                mlp_widths,
                mlp_activation: Activation::Tanh,
                kan_widths,
                grid_intervals: 5,
                spline_order: 3,
                xi,
            },
            train: TrainSection {
                learning_rate,
                iterations,
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
                scheduler,
                seeds: DEFAULT_SEEDS.to_vec(),
                weights: LossWeights::default(),
                n_residual,
                n_initial,
                n_boundary,
                n_samples: if task == Task::Fit { problems::TARGET_SAMPLES } else { 0 },
            },
            sweep: SweepSection {
                xi_grid: default_xi_grid(),
                noise_sigmas: DEFAULT_NOISE_SIGMAS.to_vec(),
                noise_xis: vec![0.0, xi, 1.0],
            },
            evaluation: EvaluationSection { points_per_axis: if task.dim() == 1 { 1000 } else { 101 } },
            out_dir: PathBuf::from("out").join(task.name()),
            record_timing: true,
        }
    }

    /// Overlays `overrides` on the defaults of the task it names (or
    /// `problem` when given, which wins). Unknown keys are errors.
    pub fn resolve(overrides: &Value, problem: Option<Task>) -> Result<Self, ConfigError> {
        let named = match overrides.get("problem") {
            Some(Value::String(s)) => Some(s.parse::<Task>()?),
            Some(other) => return Err(ConfigError::Invalid(format!("problem must be a string, got {other}"))),
            None => None,
        };
        let task = problem.or(named).ok_or(ConfigError::MissingProblem)?;
        if !overrides.is_object() {
            return Err(ConfigError::Invalid("config must be a JSON object".into()));
        }
        let mut merged = serde_json::to_value(Self::defaults(task)).expect("defaults serialize");
        merge(&mut merged, overrides);
        merged["problem"] = Value::String(task.name().into());
        // the noise study follows the chosen ξ unless set explicitly
        let xi_set = overrides.pointer("/model/xi").is_some();
        let noise_set = overrides.pointer("/sweep/noise_xis").is_some();
        let mut config: Self = serde_json::from_value(merged).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if xi_set && !noise_set {
            config.sweep.noise_xis = vec![0.0, config.model.xi, 1.0];
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str, problem: Option<Task>) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Self::resolve(&value, problem)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        let dim = self.problem.dim();
        let m = &self.model;
        for (name, widths) in [("mlp_widths", &m.mlp_widths), ("kan_widths", &m.kan_widths)] {
            if widths.len() < 2 || widths.contains(&0) {
                return bad(format!("model.{name} needs at least two positive widths"));
            }
            if widths[0] != dim || widths[widths.len() - 1] != 1 {
                return bad(format!("model.{name} must map {dim} inputs to 1 output"));
            }
        }
        if m.spline_order < 2 || m.spline_order > crate::kan::MAX_DEGREE || m.grid_intervals == 0 {
            return bad("model.spline_order must be in 2..=7 and grid_intervals positive".into());
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(m.xi) || !self.sweep.xi_grid.iter().chain(&self.sweep.noise_xis).all(|&x| unit(x)) {
            return bad("every ξ must lie in [0, 1]".into());
        }
        if !self.sweep.noise_sigmas.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return bad("noise sigmas must be non-negative".into());
        }
        if self.train.seeds.is_empty() {
            return bad("train.seeds must not be empty".into());
        }
        self.train.for_seed(0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        match self.problem {
            Task::Fit => {
                if self.train.n_samples < 2 {
                    return bad("train.n_samples must be at least 2".into());
                }
            }
            Task::Pde(kind) => {
                if self.train.n_residual == 0 || self.train.n_boundary == 0 {
                    return bad("train.n_residual and train.n_boundary must be positive".into());
                }
                if kind.is_time_dependent() && self.train.n_initial == 0 {
                    return bad("train.n_initial must be positive for time-dependent problems".into());
                }
            }
        }
        if self.evaluation.points_per_axis < 2 {
            return bad("evaluation.points_per_axis must be at least 2".into());
        }
        Ok(())
    }
}

/// Recursive object merge; tagged objects (with a `kind` key), arrays and
/// scalars are replaced whole.
fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) if !o.contains_key("kind") => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// An empty override object.
pub fn no_overrides() -> Value {
    Value::Object(Map::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_follow_the_task() {
        let p = ExperimentConfig::resolve(&json!({"problem": "poisson"}), None).unwrap();
        assert_eq!(p.model.kan_widths, vec![1, 30, 30, 1]);
        assert_eq!(p.train.scheduler, Scheduler::None);
        assert_eq!(p.train.n_initial, 0);
        let a = ExperimentConfig::resolve(&no_overrides(), Some(Task::Pde(ProblemKind::Advection))).unwrap();
        assert_eq!(a.model.xi, 0.7);
        assert_eq!(a.train.scheduler, Scheduler::Step { period: 1000, gamma: 0.75 });
        assert_eq!(a.sweep.noise_xis, vec![0.0, 0.7, 1.0]);
        assert_eq!(a.evaluation.points_per_axis, 101);
        let f = ExperimentConfig::resolve(&json!({"problem": "fit"}), None).unwrap();
        assert_eq!((f.train.learning_rate, f.train.iterations, f.train.n_samples), (0.01, 10_000, 500));
        assert_eq!(f.sweep.xi_grid.len(), 11);
    }

    #[test]
    fn overrides_merge_and_unknown_keys_fail() {
        let c = ExperimentConfig::resolve(
            &json!({"problem": "helmholtz", "model": {"xi": 0.5}, "train": {"iterations": 7, "scheduler": {"kind": "none"}}}),
            None,
        )
        .unwrap();
        assert_eq!((c.model.xi, c.train.iterations, c.train.scheduler), (0.5, 7, Scheduler::None));
        assert_eq!(c.model.grid_intervals, 5);
        assert_eq!(c.sweep.noise_xis, vec![0.0, 0.5, 1.0]);
        for bad in [
            json!({"problem": "poisson", "modle": {}}),
            json!({"problem": "poisson", "model": {"width": 3}}),
            json!({"problem": "poisson", "model": {"xi": 1.5}}),
            json!({"problem": "poisson", "model": {"mlp_widths": [2, 20, 1]}}),
            json!({"problem": "poisson", "train": {"seeds": []}}),
            json!({"problem": "nope"}),
            json!({}),
        ] {
            assert!(ExperimentConfig::resolve(&bad, None).is_err(), "{bad}");
        }
    }

    #[test]
    fn resolved_config_is_a_fixed_point() {
        for task in [Task::Fit, Task::Pde(ProblemKind::ConvectionDiffusion)] {
            let c = ExperimentConfig::resolve(&json!({"train": {"seeds": [4]}}), Some(task)).unwrap();
            let again = ExperimentConfig::from_json_str(&c.to_json(), None).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.digest(), again.digest());
        }
    }

    #[test]
    fn flag_problem_wins() {
        let c = ExperimentConfig::resolve(&json!({"problem": "poisson"}), Some(Task::Fit)).unwrap();
        assert_eq!(c.problem, Task::Fit);
    }
}
