//! Benchmark definitions: the mixed-frequency target and four PDEs.
//!
//! Inputs are ordered `(x, t)` for time-dependent problems and `(x, y)`
//! for Helmholtz. Every residual here is linear in the solution jet, so
//! an operator is a set of coefficients on `u`, its first partials and its
//! pure second partials, minus a forcing term.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::JetScalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("reference solver resolution too coarse: nx={nx}, nt={nt} (need nx >= 401, nt >= 1001)")]
    Resolution { nx: usize, nt: usize },
    #[error("reference solver produced a non-finite value at time step {step}")]
    NonFinite { step: usize },
    #[error("problem {0} has no initial condition")]
    NoInitialCondition(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Poisson,
    Advection,
    ConvectionDiffusion,
    Helmholtz,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] =
        [ProblemKind::Poisson, ProblemKind::Advection, ProblemKind::ConvectionDiffusion, ProblemKind::Helmholtz];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Advection => "advection",
            ProblemKind::ConvectionDiffusion => "convection-diffusion",
            ProblemKind::Helmholtz => "helmholtz",
        }
    }

    /// Whether the problem has an initial condition.
    pub fn is_time_dependent(self) -> bool {
        matches!(self, ProblemKind::Advection | ProblemKind::ConvectionDiffusion)
    }

    pub fn problem(self) -> PdeProblem {
        match self {
            ProblemKind::Poisson => poisson_problem(),
            ProblemKind::Advection => advection_problem(),
            ProblemKind::ConvectionDiffusion => convection_diffusion_problem(),
            ProblemKind::Helmholtz => helmholtz_problem(),
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ProblemKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown problem `{s}`"))
    }
}

/// `r = value·u + Σ_c d1[c]·∂_c u + Σ_c d2[c]·∂²_c u − forcing(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearOperator {
    pub value: f64,
    pub d1: [f64; 2],
    pub d2: [f64; 2],
}

impl LinearOperator {
    /// Coefficient of each jet component in the batch layout order
    /// (value, first partials, second partials) for input dimension `dim`.
    pub fn component_coefficients(&self, dim: usize) -> Vec<f64> {
        let mut coeffs = vec![self.value];
        coeffs.extend_from_slice(&self.d1[..dim]);
        coeffs.extend_from_slice(&self.d2[..dim]);
        coeffs
    }
}

/// A Dirichlet segment: the boundary where coordinate `fixed_axis` equals
/// `fixed_value`, parameterized by `free_axis` (none for a 1D endpoint).
#[derive(Clone, Copy, Debug)]
pub struct BoundarySegment {
    pub name: &'static str,
    pub fixed_axis: usize,
    pub fixed_value: f64,
    pub free_axis: Option<usize>,
    pub prescribed: fn(&[f64]) -> f64,
}

/// `u(x, t = t0) = g(x)`.
#[derive(Clone, Copy, Debug)]
pub struct InitialCondition {
    pub time_axis: usize,
    pub g: fn(f64) -> f64,
}

#[derive(Clone, Debug)]
pub enum Reference {
    Exact(fn(&[f64]) -> f64),
    Numerical(Arc<GridField>),
}

#[derive(Clone, Debug)]
pub struct PdeProblem {
    pub kind: ProblemKind,
    pub bounds: Vec<(f64, f64)>,
    pub operator: LinearOperator,
    pub forcing: fn(&[f64]) -> f64,
    pub initial: Option<InitialCondition>,
    pub boundaries: Vec<BoundarySegment>,
    pub reference: Reference,
}

impl PdeProblem {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Residual of a solution jet at `point`.
    pub fn residual<S: JetScalar>(&self, u: S, point: &[f64]) -> S {
        let op = &self.operator;
        let mut r = u.value_part() * op.value;
        for c in 0..self.dim() {
            if op.d1[c] != 0.0 {
                r = r + u.d1(c) * op.d1[c];
            }
            if op.d2[c] != 0.0 {
                r = r + u.d2(c) * op.d2[c];
            }
        }
        r - (self.forcing)(point)
    }

    pub fn reference(&self, point: &[f64]) -> f64 {
        match &self.reference {
            Reference::Exact(f) => f(point),
            Reference::Numerical(field) => field.interpolate(point[0], point[1]),
        }
    }

    pub fn exact(&self) -> Option<fn(&[f64]) -> f64> {
        match self.reference {
            Reference::Exact(f) => Some(f),
            Reference::Numerical(_) => None,
        }
    }

    pub fn initial_value(&self, point: &[f64]) -> Result<f64, ProblemError> {
        let ic = self.initial.ok_or(ProblemError::NoInitialCondition(self.name()))?;
        let space = if ic.time_axis == 0 { 1 } else { 0 };
        Ok((ic.g)(point[space]))
    }
}

pub const POISSON_HALF_WIDTH: f64 = 3.544_907_701_811_032; // 2·√π

fn poisson_exact(p: &[f64]) -> f64 {
    (p[0] * p[0]).sin()
}

/// `f = −u''` for `u = sin(x²)`.
pub fn poisson_forcing(p: &[f64]) -> f64 {
    let x2 = p[0] * p[0];
    4.0 * x2 * x2.sin() - 2.0 * x2.cos()
}

fn zero(_: &[f64]) -> f64 {
    0.0
}

pub fn poisson_problem() -> PdeProblem {
    let l = POISSON_HALF_WIDTH;
    PdeProblem {
        kind: ProblemKind::Poisson,
        bounds: vec![(-l, l)],
        operator: LinearOperator { value: 0.0, d1: [0.0; 2], d2: [-1.0, 0.0] },
        forcing: poisson_forcing,
        initial: None,
        boundaries: vec![
            BoundarySegment { name: "x=-L", fixed_axis: 0, fixed_value: -l, free_axis: None, prescribed: zero },
            BoundarySegment { name: "x=L", fixed_axis: 0, fixed_value: l, free_axis: None, prescribed: zero },
        ],
        reference: Reference::Exact(poisson_exact),
    }
}

fn advection_exact(p: &[f64]) -> f64 {
    2.0 * (PI * (p[0] - p[1])).sin()
}

pub fn advection_problem() -> PdeProblem {
    PdeProblem {
        kind: ProblemKind::Advection,
        bounds: vec![(0.0, 1.0), (0.0, 0.5)],
        operator: LinearOperator { value: 0.0, d1: [1.0, 1.0], d2: [0.0; 2] },
        forcing: zero,
        initial: Some(InitialCondition { time_axis: 1, g: |x| 2.0 * (PI * x).sin() }),
        boundaries: vec![
            BoundarySegment {
                name: "x=0",
                fixed_axis: 0,
                fixed_value: 0.0,
                free_axis: Some(1),
                prescribed: |p| -2.0 * (PI * p[1]).sin(),
            },
            BoundarySegment {
                name: "x=1",
                fixed_axis: 0,
                fixed_value: 1.0,
                free_axis: Some(1),
                prescribed: |p| 2.0 * (PI * p[1]).sin(),
            },
        ],
        reference: Reference::Exact(advection_exact),
    }
}

pub const CD_SPEED: f64 = 4.0;
pub const CD_DIFFUSIVITY: f64 = 0.05;
pub const CD_HALF_WIDTH: f64 = 4.0;
pub const CD_FINAL_TIME: f64 = 1.0;
/// Default reference resolution (nodes in x, time levels).
pub const CD_REFERENCE_NX: usize = 1601;
pub const CD_REFERENCE_NT: usize = 2001;

/// Gaussian pulse centred at `x = −2`.
pub fn cd_initial(x: f64) -> f64 {
    let mu = CD_DIFFUSIVITY;
    0.1 / (0.1 * mu).sqrt() * (-(x + 2.0).powi(2) / (4.0 * 0.14 * mu)).exp()
}

pub fn convection_diffusion_problem() -> PdeProblem {
    let field = cd_reference_solver(CD_REFERENCE_NX, CD_REFERENCE_NT).expect("default resolution is valid");
    convection_diffusion_with_reference(Arc::new(field))
}

pub fn convection_diffusion_with_reference(field: Arc<GridField>) -> PdeProblem {
    let l = CD_HALF_WIDTH;
    PdeProblem {
        kind: ProblemKind::ConvectionDiffusion,
        bounds: vec![(-l, l), (0.0, CD_FINAL_TIME)],
        operator: LinearOperator { value: 0.0, d1: [CD_SPEED, 1.0], d2: [-CD_DIFFUSIVITY, 0.0] },
        forcing: zero,
        initial: Some(InitialCondition { time_axis: 1, g: cd_initial }),
        boundaries: vec![
            BoundarySegment { name: "x=-L", fixed_axis: 0, fixed_value: -l, free_axis: Some(1), prescribed: zero },
            BoundarySegment { name: "x=L", fixed_axis: 0, fixed_value: l, free_axis: Some(1), prescribed: zero },
        ],
        reference: Reference::Numerical(field),
    }
}

pub const HELMHOLTZ_A1: f64 = 1.0;
pub const HELMHOLTZ_A2: f64 = 4.0;
pub const HELMHOLTZ_K: f64 = 1.0;

fn helmholtz_exact(p: &[f64]) -> f64 {
    (HELMHOLTZ_A1 * PI * p[0]).sin() * (HELMHOLTZ_A2 * PI * p[1]).sin()
}

/// The last term carries `k`, not `k²`.
pub fn helmholtz_forcing(p: &[f64]) -> f64 {
    let s = helmholtz_exact(p);
    let (a1, a2) = (HELMHOLTZ_A1 * PI, HELMHOLTZ_A2 * PI);
    -a1 * a1 * s - a2 * a2 * s + HELMHOLTZ_K * s
}

pub fn helmholtz_problem() -> PdeProblem {
    let edge = |name, fixed_axis, fixed_value, free| BoundarySegment {
        name,
        fixed_axis,
        fixed_value,
        free_axis: Some(free),
        prescribed: zero,
    };
    PdeProblem {
        kind: ProblemKind::Helmholtz,
        bounds: vec![(-1.0, 1.0), (-1.0, 1.0)],
        operator: LinearOperator { value: HELMHOLTZ_K * HELMHOLTZ_K, d1: [0.0; 2], d2: [1.0, 1.0] },
        forcing: helmholtz_forcing,
        initial: None,
        boundaries: vec![
            edge("x=-1", 0, -1.0, 1),
            edge("x=1", 0, 1.0, 1),
            edge("y=-1", 1, -1.0, 0),
            edge("y=1", 1, 1.0, 0),
        ],
        reference: Reference::Exact(helmholtz_exact),
    }
}

/// Piecewise mixed-frequency target on `[−3, 3]`.
pub fn mixed_frequency_target(x: f64) -> f64 {
    if x < 0.0 {
        5.0 + (0..4).map(|k| ((k + 1) as f64 * PI * x).sin()).sum::<f64>()
    } else {
        (2.0 * PI * x).sin() + 0.5 * (25.0 * PI * x).sin()
    }
}

pub const TARGET_INTERVAL: (f64, f64) = (-3.0, 3.0);
pub const TARGET_SAMPLES: usize = 500;

/// A field sampled on a uniform `(x, t)` grid; row `n` is time level `n`.
#[derive(Clone, Debug)]
pub struct GridField {
    pub x: (f64, f64),
    pub t: (f64, f64),
    pub values: Array2<f64>,
}

impl GridField {
    pub fn nx(&self) -> usize {
        self.values.ncols()
    }

    pub fn nt(&self) -> usize {
        self.values.nrows()
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x.0 + (self.x.1 - self.x.0) * i as f64 / (self.nx() - 1) as f64
    }

    pub fn t_at(&self, n: usize) -> f64 {
        self.t.0 + (self.t.1 - self.t.0) * n as f64 / (self.nt() - 1) as f64
    }

    /// Cubic Lagrange interpolation in `x` and linear in `t`, clamped to
    /// the grid.
    pub fn interpolate(&self, x: f64, t: f64) -> f64 {
        let locate = |v: f64, (lo, hi): (f64, f64), n: usize| {
            let s = ((v - lo) / (hi - lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        let (i, fx) = locate(x, self.x, self.nx());
        let (n, ft) = locate(t, self.t, self.nt());
        // stencil i-1..=i+2 shifted inwards at the ends
        let start = i.saturating_sub(1).min(self.nx() - 4);
        let s = fx + (i - start) as f64;
        let w = [
            -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
            s * (s - 2.0) * (s - 3.0) / 2.0,
            -s * (s - 1.0) * (s - 3.0) / 2.0,
            s * (s - 1.0) * (s - 2.0) / 6.0,
        ];
        let row = |n: usize| (0..4).map(|k| w[k] * self.values[[n, start + k]]).sum::<f64>();
        row(n) * (1.0 - ft) + row(n + 1) * ft
    }
}

/// Crank–Nicolson solution of `u_t + c u_x = μ u_xx` on `[−L, L] × [0, T]`
/// with the Gaussian initial pulse and zero Dirichlet ends. `nx` spatial
/// nodes and `nt` time levels, both including endpoints.
pub fn cd_reference_solver(nx: usize, nt: usize) -> Result<GridField, ProblemError> {
    if nx < 401 || nt < 1001 {
        return Err(ProblemError::Resolution { nx, nt });
    }
    let (l, c, mu) = (CD_HALF_WIDTH, CD_SPEED, CD_DIFFUSIVITY);
    let dx = 2.0 * l / (nx - 1) as f64;
    let dt = CD_FINAL_TIME / (nt - 1) as f64;
    let alpha = c / (2.0 * dx);
    let beta = mu / (dx * dx);
    // (L u)_i = (β + α) u_{i−1} − 2β u_i + (β − α) u_{i+1}
    let (lower, diag, upper) = ((beta + alpha) * dt / 2.0, -beta * dt, (beta - alpha) * dt / 2.0);

    let mut field = GridField { x: (-l, l), t: (0.0, CD_FINAL_TIME), values: Array2::zeros((nt, nx)) };
    for i in 1..nx - 1 {
        field.values[[0, i]] = cd_initial(field.x_at(i));
    }
    let values = &mut field.values;
    let m = nx - 2;
    let mut rhs = vec![0.0; m];
    let mut c_prime = vec![0.0; m];
    for step in 1..nt {
        let prev = values.row(step - 1);
        for (j, r) in rhs.iter_mut().enumerate() {
            let i = j + 1;
            *r = lower * prev[i - 1] + (1.0 + diag) * prev[i] + upper * prev[i + 1];
        }
        // Thomas algorithm on (1 − diag) on the diagonal, −lower / −upper off it.
        let (a, b, cc) = (-lower, 1.0 - diag, -upper);
        c_prime[0] = cc / b;
        rhs[0] /= b;
        for j in 1..m {
            let denom = b - a * c_prime[j - 1];
            c_prime[j] = cc / denom;
            rhs[j] = (rhs[j] - a * rhs[j - 1]) / denom;
        }
        for j in (0..m - 1).rev() {
            rhs[j] -= c_prime[j] * rhs[j + 1];
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite { step });
        }
        let mut row = values.row_mut(step);
        for j in 0..m {
            row[j + 1] = rhs[j];
        }
    }
    Ok(field)
}

/// Free-space solution for the same pulse (ignores the boundaries).
pub fn cd_free_space(x: f64, t: f64) -> f64 {
    let mu = CD_DIFFUSIVITY;
    let t0 = 0.14;
    let amplitude = 0.1 / (0.1 * mu).sqrt() * (t0 / (t0 + t)).sqrt();
    let centre = -2.0 + CD_SPEED * t;
    amplitude * (-(x - centre).powi(2) / (4.0 * mu * (t0 + t))).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet;

    #[test]
    fn poisson_values() {
        let p = poisson_problem();
        assert!(p.reference(&[POISSON_HALF_WIDTH]).abs() < 1e-14);
        assert!(p.reference(&[-POISSON_HALF_WIDTH]).abs() < 1e-14);
        assert_eq!(poisson_forcing(&[0.0]), -2.0);
        assert!((POISSON_HALF_WIDTH - 2.0 * PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn advection_values() {
        let p = advection_problem();
        assert!((p.reference(&[0.5, 0.0]) - 2.0).abs() < 1e-15);
        for &t in &[0.1, 0.33, 0.5] {
            let right = p.boundaries[1];
            assert!((p.reference(&[1.0, t]) - (right.prescribed)(&[1.0, t])).abs() < 1e-12);
        }
    }

    #[test]
    fn helmholtz_forcing_value() {
        assert!((helmholtz_forcing(&[0.5, 0.125]) - (1.0 - 17.0 * PI * PI)).abs() < 1e-12);
    }

    #[test]
    fn cd_initial_pulse() {
        assert!((cd_initial(-2.0) - 0.1 / (0.1f64 * 0.05).sqrt()).abs() < 1e-15);
        assert!((cd_initial(-2.0) - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(cd_initial(-4.0) < 1e-6 && cd_initial(4.0) < 1e-6);
        let argmax = (0..=8000)
            .map(|i| -4.0 + i as f64 * 1e-3)
            .max_by(|a, b| cd_initial(*a).total_cmp(&cd_initial(*b)))
            .unwrap();
        assert!((argmax + 2.0).abs() < 1e-9);
    }

    #[test]
    fn mixed_frequency_values() {
        assert!((mixed_frequency_target(-1.0) - 5.0).abs() < 1e-12);
        assert_eq!(mixed_frequency_target(0.0), 0.0);
        let expected = 1.0 + 0.5 * (0.25 * PI).sin();
        assert!((mixed_frequency_target(0.25) - expected).abs() < 1e-12);
        assert!((expected - 1.35355).abs() < 1e-5);
    }

    #[test]
    fn residual_reads_the_right_components() {
        let p = advection_problem();
        let mut u = Jet::constant(0.7);
        u.d1 = [0.25, -0.25];
        assert_eq!(p.residual(u, &[0.3, 0.2]).value, 0.0);
    }

    #[test]
    fn reference_solver_rejects_coarse_grids() {
        assert_eq!(cd_reference_solver(200, 2000).unwrap_err(), ProblemError::Resolution { nx: 200, nt: 2000 });
    }

    #[test]
    fn problem_names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
        }
        assert!("heat".parse::<ProblemKind>().is_err());
    }
}
