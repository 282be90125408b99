//! Training runs, ξ and noise sweeps, and the command entry points that
//! write their tables.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Task};
use crate::error::ModelError;
use crate::hybrid::{HpkmModel, Network};
use crate::kan::{Kan, KanSpec};
use crate::mlp::{Mlp, MlpSpec};
use crate::pinn::{CollocationSet, Objective, PinnError, PinnObjective, SupervisedObjective};
use crate::problems::{self, PdeProblem};
use crate::report::{self, ErrorField, ExperimentResult, NoiseRow, NoiseSummaryRow, ReportError, SweepSummaryRow};
use crate::sample::{self, PointSet, SampleError};
use crate::train::{self, TrainError, TrainHistory};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pinn(#[from] PinnError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| ExperimentError::Io { path: path.to_path_buf(), source }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, ExperimentError::Train(TrainError::Diverged { .. } | TrainError::NonFiniteGradient { .. }))
    }
}

/// Data shared by every run of one config: the problem, its training
/// points and the test grid.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub task: Task,
    pub problem: Option<PdeProblem>,
    pub collocation: Option<CollocationSet>,
    /// `(x, y)` training samples of the function fit.
    pub targets: Vec<(f64, f64)>,
    pub test_grid: PointSet,
    pub bounds: Vec<(f64, f64)>,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let t = &config.train;
        let per_axis = config.evaluation.points_per_axis;
        match config.problem {
            Task::Fit => {
                let (lo, hi) = problems::TARGET_INTERVAL;
                let bounds = vec![(lo, hi)];
                let train = sample::uniform_points(1, t.n_samples, &bounds)?;
                let targets = train.iter().map(|p| (p[0], problems::mixed_frequency_target(p[0]))).collect();
                let test_grid = sample::uniform_points(1, per_axis, &bounds)?;
                Ok(Prepared { task: Task::Fit, problem: None, collocation: None, targets, test_grid, bounds })
            }
            Task::Pde(kind) => {
                let problem = kind.problem();
                let collocation = CollocationSet::sample(&problem, t.n_residual, t.n_initial, t.n_boundary)?;
                let test_grid = sample::uniform_points(problem.dim(), per_axis, &problem.bounds)?;
                let bounds = problem.bounds.clone();
                Ok(Prepared {
                    task: config.problem,
                    problem: Some(problem),
                    collocation: Some(collocation),
                    targets: vec![],
                    test_grid,
                    bounds,
                })
            }
        }
    }

    pub fn reference(&self, point: &[f64]) -> f64 {
        match &self.problem {
            Some(problem) => problem.reference(point),
            None => problems::mixed_frequency_target(point[0]),
        }
    }

    /// Error of `net` on the test grid, with the inputs optionally
    /// replaced by perturbed copies of the grid points.
    pub fn evaluate(&self, net: &Network, params: &[f64], inputs: Option<&PointSet>) -> ErrorField {
        let reference = self.test_grid.iter().map(|p| self.reference(p)).collect();
        let inputs = inputs.unwrap_or(&self.test_grid);
        let prediction = net.predict(params, &inputs.points);
        ErrorField::from_values(self.test_grid.dim, self.test_grid.points.clone(), reference, prediction)
    }
}

/// The MLP for `ξ = 0`, the KAN for `ξ = 1`, the fused model otherwise.
pub fn build_network(
    config: &ExperimentConfig,
    bounds: &[(f64, f64)],
    xi: f64,
    seed: u64,
) -> Result<Network, ModelError> {
    let m = &config.model;
    let mlp = || {
        let mut spec = MlpSpec::new(m.mlp_widths.clone(), seed);
        spec.activation = m.mlp_activation;
        Mlp::new(spec)
    };
    let kan = || Kan::new(KanSpec::new(m.kan_widths.clone(), m.grid_intervals, m.spline_order, bounds.to_vec(), seed));
    Ok(if xi == 0.0 {
        Network::Mlp(mlp()?)
    } else if xi == 1.0 {
        Network::Kan(kan()?)
    } else {
        Network::Hybrid(HpkmModel::new(kan()?, mlp()?, xi)?)
    })
}

/// One trained model and its evaluation.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub result: ExperimentResult,
    pub history: TrainHistory,
    pub field: ErrorField,
    pub network: Network,
}

/// Trains one model; on divergence the error carries the partial history.
pub fn run(prepared: &Prepared, config: &ExperimentConfig, xi: f64, seed: u64) -> Result<RunOutput, ExperimentError> {
    let network = build_network(config, &prepared.bounds, xi, seed)?;
    run_network(prepared, config, network, xi, seed)
}

/// Trains a given network with the config's optimizer settings.
pub fn run_network(
    prepared: &Prepared,
    config: &ExperimentConfig,
    network: Network,
    xi: f64,
    seed: u64,
) -> Result<RunOutput, ExperimentError> {
    let train_config = config.train.for_seed(seed);
    let objective: Box<dyn Objective + '_> = match (&prepared.problem, &prepared.collocation) {
        (Some(problem), Some(colloc)) => Box::new(PinnObjective::new(&network, problem, colloc, config.train.weights)?),
        _ => Box::new(SupervisedObjective::new(&network, &prepared.targets)?),
    };
    let history = train::train(objective.as_ref(), network.init().into_values(), &train_config)?;
    drop(objective);
    let field = prepared.evaluate(&network, &history.params, None);
    let result = ExperimentResult {
        problem: config.problem.name().to_string(),
        xi,
        seed,
        rel_l2: field.relative_l2()?,
        final_loss: history.final_parts.total,
        params: network.param_count(),
        seconds: if config.record_timing { history.seconds } else { 0.0 },
        config_digest: config.digest(),
    };
    Ok(RunOutput { result, history, field, network })
}

/// Result row for a run that could not finish.
pub fn failed_result(config: &ExperimentConfig, xi: f64, seed: u64, params: usize) -> ExperimentResult {
    ExperimentResult {
        problem: config.problem.name().to_string(),
        xi,
        seed,
        rel_l2: f64::NAN,
        final_loss: f64::NAN,
        params,
        seconds: 0.0,
        config_digest: config.digest(),
    }
}

/// Outcome of one sweep cell.
#[derive(Clone, Debug)]
pub struct Cell {
    pub result: ExperimentResult,
    pub output: Option<RunOutput>,
    pub error: Option<String>,
}

fn run_cell(prepared: &Prepared, config: &ExperimentConfig, xi: f64, seed: u64) -> Result<Cell, ExperimentError> {
    match run(prepared, config, xi, seed) {
        Ok(out) => Ok(Cell { result: out.result.clone(), output: Some(out), error: None }),
        Err(e) if e.is_divergence() => {
            let params = build_network(config, &prepared.bounds, xi, seed)?.param_count();
            Ok(Cell { result: failed_result(config, xi, seed, params), output: None, error: Some(e.to_string()) })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    /// Ordered by (ξ, seed).
    pub cells: Vec<Cell>,
    pub summary: Vec<SweepSummaryRow>,
}

/// One model per (ξ, seed); diverged cells are recorded with `NaN` errors
/// and the sweep continues.
pub fn xi_sweep(
    prepared: &Prepared,
    config: &ExperimentConfig,
    xis: &[f64],
    seeds: &[u64],
) -> Result<SweepOutput, ExperimentError> {
    let mut cells = Vec::with_capacity(xis.len() * seeds.len());
    let mut summary = Vec::with_capacity(xis.len());
    for &xi in xis {
        let start = cells.len();
        for &seed in seeds {
            cells.push(run_cell(prepared, config, xi, seed)?);
        }
        let errors: Vec<f64> = cells[start..].iter().map(|c| c.result.rel_l2).collect();
        summary.push(SweepSummaryRow {
            problem: config.problem.name().to_string(),
            xi,
            median_rel_l2: report::median(&errors),
            runs: errors.len(),
            failures: errors.iter().filter(|e| !e.is_finite()).count(),
        });
    }
    Ok(SweepOutput { cells, summary })
}

#[derive(Clone, Debug)]
pub struct NoiseOutput {
    pub clean: SweepOutput,
    pub rows: Vec<NoiseRow>,
    pub summary: Vec<NoiseSummaryRow>,
    /// Places where the median error decreased as σ grew.
    pub inversions: Vec<String>,
}

/// Relative error of each clean-trained model on test inputs perturbed by
/// Gaussian noise of every σ. The reference stays at the clean points.
pub fn noise_sweep(
    prepared: &Prepared,
    config: &ExperimentConfig,
    xis: &[f64],
    sigmas: &[f64],
    seeds: &[u64],
) -> Result<NoiseOutput, ExperimentError> {
    let clean = xi_sweep(prepared, config, xis, seeds)?;
    Ok(noise_tables(prepared, clean, sigmas))
}

/// Noise tables for already trained models.
pub fn noise_tables(prepared: &Prepared, clean: SweepOutput, sigmas: &[f64]) -> NoiseOutput {
    let mut rows = Vec::new();
    for cell in &clean.cells {
        for &sigma in sigmas {
            let rel_l2 = match &cell.output {
                Some(out) => {
                    let noisy = sample::add_gaussian_noise(&prepared.test_grid, sigma, cell.result.seed)
                        .expect("sigma validated");
                    prepared.evaluate(&out.network, &out.history.params, Some(&noisy)).relative_l2().unwrap_or(f64::NAN)
                }
                None => f64::NAN,
            };
            rows.push(NoiseRow { sigma, xi: cell.result.xi, seed: cell.result.seed, rel_l2 });
        }
    }
    let mut summary = Vec::new();
    let mut inversions = Vec::new();
    let xis: Vec<f64> = clean.summary.iter().map(|s| s.xi).collect();
    for &xi in &xis {
        let mut previous: Option<(f64, f64)> = None;
        for &sigma in sigmas {
            let errors: Vec<f64> = rows.iter().filter(|r| r.xi == xi && r.sigma == sigma).map(|r| r.rel_l2).collect();
            let median = report::median(&errors);
            if let Some((s0, m0)) = previous {
                if median < m0 {
                    inversions
                        .push(format!("xi={xi}: median error {median} at sigma={sigma} below {m0} at sigma={s0}"));
                }
            }
            previous = Some((sigma, median));
            summary.push(NoiseSummaryRow { sigma, xi, median_rel_l2: median });
        }
    }
    NoiseOutput { clean, rows, summary, inversions }
}

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct CommandReport {
    pub results: Vec<ExperimentResult>,
    pub files: Vec<PathBuf>,
    /// Diverged runs and other non-fatal notes.
    pub warnings: Vec<String>,
}

struct Output<'a> {
    dir: &'a Path,
    report: CommandReport,
}

impl<'a> Output<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self, ExperimentError> {
        let dir = config.out_dir.as_path();
        fs::create_dir_all(dir).map_err(ExperimentError::io(dir))?;
        let mut out = Output { dir, report: CommandReport::default() };
        out.write_with("config.json", |w| {
            use std::io::Write;
            let mut w = w;
            writeln!(w, "{}", config.to_json()).map_err(|e| ReportError::Csv(e.into()))
        })?;
        Ok(out)
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<fs::File>) -> Result<(), ReportError>,
    ) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(ExperimentError::io(&path))?;
        f(BufWriter::new(file)).map_err(|e| match e {
            ReportError::Csv(c) if c.is_io_error() => match c.into_kind() {
                csv::ErrorKind::Io(source) => ExperimentError::Io { path: path.clone(), source },
                _ => unreachable!("checked io error"),
            },
            other => other.into(),
        })?;
        self.report.files.push(path);
        Ok(())
    }

    fn rows<T: report::Table>(&mut self, name: &str, rows: &[T]) -> Result<(), ExperimentError> {
        self.write_with(name, |w| report::write_rows(w, rows))
    }

    fn history(&mut self, name: &str, h: &TrainHistory) -> Result<(), ExperimentError> {
        self.rows(name, &report::history_rows(&h.losses, &h.lrs))
    }

    fn field(&mut self, name: &str, field: &ErrorField, task: Task) -> Result<(), ExperimentError> {
        self.write_with(name, |w| report::write_field(w, field, task.second_axis()))
    }
}

fn tag(xi: f64, seed: u64) -> String {
    format!("xi{xi}_seed{seed}")
}

/// Trains at the config's ξ for every seed. Fit runs also write the
/// spectra of the reference and of each prediction.
fn train_and_write(config: &ExperimentConfig) -> Result<CommandReport, ExperimentError> {
    let prepared = Prepared::new(config)?;
    let mut out = Output::new(config)?;
    let xi = config.model.xi;
    if config.problem == Task::Fit {
        let xs: Vec<f64> = prepared.test_grid.iter().map(|p| p[0]).collect();
        let reference: Vec<f64> = prepared.test_grid.iter().map(|p| prepared.reference(p)).collect();
        let spectrum = report::fourier_spectrum_at(&xs, &reference)?;
        out.rows("spectrum_reference.csv", &report::spectrum_rows(&spectrum))?;
    }
    let mut failure = None;
    for &seed in &config.train.seeds {
        match run(&prepared, config, xi, seed) {
            Ok(run) => {
                let t = tag(xi, seed);
                out.history(&format!("history_{t}.csv"), &run.history)?;
                let kind = if config.problem == Task::Fit { "prediction" } else { "field" };
                out.field(&format!("{kind}_{t}.csv"), &run.field, config.problem)?;
                if config.problem == Task::Fit {
                    let xs: Vec<f64> = run.field.points.iter().map(|p| p[0]).collect();
                    let spectrum = report::fourier_spectrum_at(&xs, &run.field.prediction)?;
                    out.rows(&format!("spectrum_{t}.csv"), &report::spectrum_rows(&spectrum))?;
                }
                out.report.results.push(run.result);
            }
            Err(ExperimentError::Train(TrainError::Diverged { epoch, reason, history })) => {
                out.history(&format!("history_{}.csv", tag(xi, seed)), &history)?;
                let params = build_network(config, &prepared.bounds, xi, seed)?.param_count();
                out.report.results.push(failed_result(config, xi, seed, params));
                failure = Some(TrainError::Diverged { epoch, reason, history });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let results = out.report.results.clone();
    out.rows("results.csv", &results)?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(out.report),
    }
}

/// Fits the mixed-frequency target.
pub fn cmd_fit_function(config: &ExperimentConfig) -> Result<CommandReport, ExperimentError> {
    if config.problem != Task::Fit {
        return Err(crate::config::ConfigError::Invalid(format!(
            "fit-function needs problem 'fit', got '{}'",
            config.problem
        ))
        .into());
    }
    train_and_write(config)
}

/// Solves one PDE.
pub fn cmd_solve(config: &ExperimentConfig) -> Result<CommandReport, ExperimentError> {
    if config.problem == Task::Fit {
        return Err(crate::config::ConfigError::Invalid("solve needs a PDE problem; use fit-function".into()).into());
    }
    train_and_write(config)
}

fn write_sweep(out: &mut Output<'_>, config: &ExperimentConfig, sweep: &SweepOutput) -> Result<(), ExperimentError> {
    for cell in &sweep.cells {
        let t = tag(cell.result.xi, cell.result.seed);
        if let Some(run) = &cell.output {
            out.history(&format!("history_{t}.csv"), &run.history)?;
            out.field(&format!("field_{t}.csv"), &run.field, config.problem)?;
        }
        if let Some(e) = &cell.error {
            out.report.warnings.push(format!("{t}: {e}"));
        }
        out.report.results.push(cell.result.clone());
    }
    let results = out.report.results.clone();
    out.rows("results.csv", &results)?;
    out.rows("summary.csv", &sweep.summary)
}

/// Trains one model per (ξ, seed) over the configured ξ grid.
pub fn cmd_sweep_xi(config: &ExperimentConfig) -> Result<CommandReport, ExperimentError> {
    let prepared = Prepared::new(config)?;
    let mut out = Output::new(config)?;
    let sweep = xi_sweep(&prepared, config, &config.sweep.xi_grid, &config.train.seeds)?;
    write_sweep(&mut out, config, &sweep)?;
    Ok(out.report)
}

/// Clean training at each compared ξ, then evaluation under input noise.
pub fn cmd_noise(config: &ExperimentConfig) -> Result<CommandReport, ExperimentError> {
    let prepared = Prepared::new(config)?;
    let mut out = Output::new(config)?;
    let noise =
        noise_sweep(&prepared, config, &config.sweep.noise_xis, &config.sweep.noise_sigmas, &config.train.seeds)?;
    write_sweep(&mut out, config, &noise.clean)?;
    out.rows("noise.csv", &noise.rows)?;
    out.rows("noise_summary.csv", &noise.summary)?;
    out.report.warnings.extend(noise.inversions);
    Ok(out.report)
}
