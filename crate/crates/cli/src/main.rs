use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hpkm::config::{ConfigError, ExperimentConfig, Task};
use hpkm::experiment::{self, CommandReport, ExperimentError};
use hpkm::report::ReportError;
use hpkm::train::TrainError;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "hpkm", version, about = "Train hybrid KAN-MLP models on function fits and PDE benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the mixed-frequency target function.
    FitFunction(Opts),
    /// Solve one PDE benchmark.
    Solve(Opts),
    /// Train over a grid of mixing ratios.
    SweepXi(Opts),
    /// Evaluate clean-trained models on noisy inputs.
    Noise(Opts),
    /// Print the fully resolved config and exit.
    PrintConfig(Opts),
}

#[derive(Args, Clone, Debug, Default)]
struct Opts {
    /// JSON config; omitted fields take the problem's defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// fit, poisson, advection, convection-diffusion or helmholtz.
    #[arg(long, value_name = "NAME")]
    problem: Option<String>,
    /// KAN weight in the fused output.
    #[arg(long, value_name = "F")]
    xi: Option<f64>,
    /// Run a single seed instead of the configured list.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory for tables and the resolved config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the number of optimizer steps.
    #[arg(long, value_name = "N")]
    iterations: Option<usize>,
    /// Print the resolved config before running.
    #[arg(long)]
    print_config: bool,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    const CONFIG: u8 = 2;
    const DIVERGED: u8 = 3;
    const IO: u8 = 4;

    fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: Self::CONFIG, error: error.into() }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Io { .. } => Failure::IO,
            ExperimentError::Report(ReportError::Csv(_)) => Failure::IO,
            ExperimentError::Train(TrainError::Diverged { .. } | TrainError::NonFiniteGradient { .. }) => {
                Failure::DIVERGED
            }
            _ => Failure::CONFIG,
        };
        Failure { code, error: e.into() }
    }
}

fn load_overrides(path: Option<&Path>) -> Result<Value, Failure> {
    let Some(path) = path else { return Ok(Value::Object(Map::new())) };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|error| Failure { code: Failure::IO, error })?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(Failure::config)
}

fn set(root: &mut Value, section: Option<&str>, key: &str, value: Value) -> Result<(), Failure> {
    let invalid =
        || Failure::config(ConfigError::Invalid(format!("'{}' must be an object", section.unwrap_or("config"))));
    let mut obj = root.as_object_mut().ok_or_else(invalid)?;
    if let Some(section) = section {
        obj = obj.entry(section).or_insert_with(|| json!({})).as_object_mut().ok_or_else(invalid)?;
    }
    obj.insert(key.to_string(), value);
    Ok(())
}

fn resolve(opts: &Opts, default_task: Option<Task>) -> Result<ExperimentConfig, Failure> {
    let mut overrides = load_overrides(opts.config.as_deref())?;
    if let Some(xi) = opts.xi {
        set(&mut overrides, Some("model"), "xi", json!(xi))?;
    }
    if let Some(seed) = opts.seed {
        set(&mut overrides, Some("train"), "seeds", json!([seed]))?;
    }
    if let Some(n) = opts.iterations {
        set(&mut overrides, Some("train"), "iterations", json!(n))?;
    }
    if let Some(out) = &opts.out {
        set(&mut overrides, None, "out_dir", json!(out))?;
    }
    let task = match &opts.problem {
        Some(name) => Some(name.parse::<Task>().map_err(Failure::config)?),
        None if overrides.get("problem").is_none() => default_task,
        None => None,
    };
    ExperimentConfig::resolve(&overrides, task).map_err(Failure::config)
}

fn summarize(report: &CommandReport) {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for r in &report.results {
        println!(
            "{} xi={} seed={} rel_l2={:.4e} final_loss={:.4e} params={} seconds={:.1}",
            r.problem, r.xi, r.seed, r.rel_l2, r.final_loss, r.params, r.seconds
        );
    }
    if let Some(dir) = report.files.first().and_then(|f| f.parent()) {
        println!("wrote {} files to {}", report.files.len(), dir.display());
    }
}

type Action = fn(&ExperimentConfig) -> Result<CommandReport, ExperimentError>;

fn run(cli: Cli) -> Result<(), Failure> {
    let (opts, default_task, action): (_, _, Option<Action>) = match cli.command {
        Command::FitFunction(o) => (o, Some(Task::Fit), Some(experiment::cmd_fit_function)),
        Command::Solve(o) => (o, None, Some(experiment::cmd_solve)),
        Command::SweepXi(o) => (o, None, Some(experiment::cmd_sweep_xi)),
        Command::Noise(o) => (o, None, Some(experiment::cmd_noise)),
        Command::PrintConfig(o) => (o, None, None),
    };
    let config = resolve(&opts, default_task)?;
    if opts.print_config || action.is_none() {
        println!("{}", config.to_json());
    }
    if let Some(action) = action {
        summarize(&action(&config)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
