use hpkm::config::{ExperimentConfig, Task};
use hpkm::experiment::{self, Prepared};
use hpkm::problems::ProblemKind;
use hpkm::Network;

fn small(task: Task, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(task);
    c.train.iterations = 5;
    c.train.seeds = vec![0, 1];
    c.train.n_residual = 40;
    c.train.n_initial = if c.train.n_initial > 0 { 10 } else { 0 };
    c.train.n_boundary = 10;
    c.train.n_samples = 50;
    c.model.mlp_widths = {
        let d = task.dim();
        vec![d, 6, 1]
    };
    c.model.kan_widths = vec![task.dim(), 3, 1];
    c.evaluation.points_per_axis = if task.dim() == 1 { 64 } else { 9 };
    c.out_dir = dir.to_path_buf();
    c.record_timing = false;
    c
}

#[test]
fn network_choice_follows_xi() {
    let c = ExperimentConfig::defaults(Task::Pde(ProblemKind::Poisson));
    let b = [(0.0, 1.0)];
    assert!(matches!(experiment::build_network(&c, &b, 0.0, 0).unwrap(), Network::Mlp(_)));
    assert!(matches!(experiment::build_network(&c, &b, 1.0, 0).unwrap(), Network::Kan(_)));
    assert!(matches!(experiment::build_network(&c, &b, 0.5, 0).unwrap(), Network::Hybrid(_)));
}

#[test]
fn solve_writes_tables_for_every_problem() {
    for kind in [ProblemKind::Poisson, ProblemKind::Advection, ProblemKind::ConvectionDiffusion, ProblemKind::Helmholtz]
    {
        let dir = tempfile::tempdir().unwrap();
        let c = small(Task::Pde(kind), dir.path());
        let report = experiment::cmd_solve(&c).unwrap();
        assert_eq!(report.results.len(), 2);
        for r in &report.results {
            assert!(r.rel_l2.is_finite() && r.final_loss.is_finite());
            assert_eq!(r.seconds, 0.0);
        }
        let t = format!("xi{}", c.model.xi);
        for name in ["results.csv".to_string(), "config.json".into(), format!("field_{t}_seed1.csv")] {
            assert!(dir.path().join(&name).exists(), "{name}");
        }
        let history = std::fs::read_to_string(dir.path().join(format!("history_{t}_seed0.csv"))).unwrap();
        assert_eq!(history.lines().count(), 1 + 5);
    }
}

#[test]
fn fit_writes_spectra_and_rejects_pde_commands() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(Task::Fit, dir.path());
    experiment::cmd_fit_function(&c).unwrap();
    assert!(dir.path().join("spectrum_reference.csv").exists());
    assert!(dir.path().join("spectrum_xi0.9_seed0.csv").exists());
    assert!(dir.path().join("prediction_xi0.9_seed1.csv").exists());
    assert!(experiment::cmd_solve(&c).is_err());
    let pde = small(Task::Pde(ProblemKind::Poisson), dir.path());
    assert!(experiment::cmd_fit_function(&pde).is_err());
}

#[test]
fn sweep_and_noise_tables_have_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Task::Pde(ProblemKind::Helmholtz), dir.path());
    c.sweep.xi_grid = vec![0.0, 0.5, 1.0];
    let report = experiment::cmd_sweep_xi(&c).unwrap();
    assert_eq!(report.results.len(), 6);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    c.sweep.noise_xis = vec![0.0, 1.0];
    c.sweep.noise_sigmas = vec![0.0, 0.1];
    experiment::cmd_noise(&c).unwrap();
    let noise = std::fs::read_to_string(dir.path().join("noise.csv")).unwrap();
    assert_eq!(noise.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn zero_noise_matches_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(Task::Pde(ProblemKind::Poisson), dir.path());
    let prepared = Prepared::new(&c).unwrap();
    let out = experiment::noise_sweep(&prepared, &c, &[0.3], &[0.0], &[0]).unwrap();
    assert_eq!(out.rows[0].rel_l2, out.clean.cells[0].result.rel_l2);
}

#[test]
fn runs_are_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(Task::Pde(ProblemKind::Advection), dir.path());
    let prepared = Prepared::new(&c).unwrap();
    let a = experiment::run(&prepared, &c, 0.7, 3).unwrap();
    let b = experiment::run(&prepared, &c, 0.7, 3).unwrap();
    assert_eq!(a.history.params, b.history.params);
    assert_eq!(a.history.losses, b.history.losses);
}
