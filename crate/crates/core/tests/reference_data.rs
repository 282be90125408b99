//! Reference solutions, the convection-diffusion solver, and point-set
//! quality checked against independent oracles.

use hpkm::autodiff::Jet;
use hpkm::problems::{self, PdeProblem, ProblemKind, Reference};
use hpkm::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_interior(problem: &PdeProblem, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| problem.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()).collect()
}

#[test]
fn closed_form_references_solve_their_equations() {
    for kind in [ProblemKind::Poisson, ProblemKind::Advection, ProblemKind::Helmholtz] {
        let problem = kind.problem();
        let exact = problem.exact().unwrap();
        for point in random_interior(&problem, 1000, 7) {
            let u = exact_jet(exact, &point);
            let r = problem.residual(u, &point);
            assert!(r.value.abs() < 1e-6, "{kind:?} residual {} at {point:?}", r.value);
        }
    }
}

/// Jet of the closed-form reference by fourth-order central differences.
fn exact_jet(exact: fn(&[f64]) -> f64, point: &[f64]) -> Jet {
    let h = 1e-3;
    let mut jet = Jet::constant(exact(point));
    let at = |i: usize, s: f64| {
        let mut q = point.to_vec();
        q[i] += s;
        exact(&q)
    };
    for i in 0..point.len() {
        let (m2, m1, p1, p2) = (at(i, -2.0 * h), at(i, -h), at(i, h), at(i, 2.0 * h));
        jet.d1[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        jet.d2[i] = (-m2 + 16.0 * m1 - 30.0 * jet.value + 16.0 * p1 - p2) / (12.0 * h * h);
    }
    jet
}

#[test]
fn references_meet_their_conditions() {
    let cd = problems::convection_diffusion_with_reference(std::sync::Arc::new(
        problems::cd_reference_solver(problems::CD_REFERENCE_NX, problems::CD_REFERENCE_NT).unwrap(),
    ));
    let problems: Vec<PdeProblem> =
        vec![problems::poisson_problem(), problems::advection_problem(), cd, problems::helmholtz_problem()];
    for problem in problems {
        let tol = match problem.reference {
            Reference::Exact(_) => 1e-9,
            Reference::Numerical(_) => 1e-6,
        };
        let boundary = sample::boundary_points(&problem, 200).unwrap();
        for (p, &tag) in boundary.iter().zip(&boundary.tags) {
            let want = (problem.boundaries[tag].prescribed)(p);
            assert!((problem.reference(p) - want).abs() < tol, "{} boundary at {p:?}", problem.name());
        }
        if problem.initial.is_some() {
            for p in sample::initial_points(&problem, 200).unwrap().iter() {
                let want = problem.initial_value(p).unwrap();
                assert!((problem.reference(p) - want).abs() < tol, "{} initial at {p:?}", problem.name());
            }
        }
    }
}

#[test]
fn cd_solver_properties() {
    let field = problems::cd_reference_solver(1601, 2001).unwrap();
    for i in 1..field.nx() - 1 {
        assert_eq!(field.values[[0, i]], problems::cd_initial(field.x_at(i)));
    }

    let dx = field.x_at(1) - field.x_at(0);
    let masses: Vec<f64> = field.values.rows().into_iter().map(|row| row.sum() * dx).collect();
    for pair in masses.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12, "mass grew: {} -> {}", pair[0], pair[1]);
    }

    let mut worst = 0.0f64;
    for n in (0..field.nt()).step_by(50) {
        let t = field.t_at(n);
        for i in 0..field.nx() {
            worst = worst.max((field.values[[n, i]] - problems::cd_free_space(field.x_at(i), t)).abs());
        }
    }
    assert!(worst < 1e-3, "free-space deviation {worst}");
}

#[test]
fn cd_solver_grid_convergence() {
    let coarse = problems::cd_reference_solver(problems::CD_REFERENCE_NX, problems::CD_REFERENCE_NT).unwrap();
    let fine =
        problems::cd_reference_solver(2 * problems::CD_REFERENCE_NX - 1, 2 * problems::CD_REFERENCE_NT - 1).unwrap();
    let mut worst = 0.0f64;
    for n in 0..coarse.nt() {
        for i in 0..coarse.nx() {
            let (x, t) = (coarse.x_at(i), coarse.t_at(n));
            worst = worst.max((coarse.values[[n, i]] - fine.interpolate(x, t)).abs());
        }
    }
    assert!(worst < 1e-3, "resolution change {worst}");
}

#[test]
fn sobol_matches_reference_sequence() {
    let expected = [
        [0.5, 0.5],
        [0.75, 0.25],
        [0.25, 0.75],
        [0.375, 0.375],
        [0.875, 0.875],
        [0.625, 0.125],
        [0.125, 0.625],
        [0.1875, 0.3125],
        [0.6875, 0.8125],
        [0.9375, 0.0625],
    ];
    let got = sample::sobol_unit(2, 10, 1).unwrap();
    assert_eq!(got, expected);
    let first = sample::sobol_unit(1, 4, 0).unwrap();
    assert_eq!(first.iter().map(|p| p[0]).collect::<Vec<_>>(), [0.0, 0.5, 0.75, 0.25]);
}

/// Exact star discrepancy of a 2D point set in the unit square.
fn star_discrepancy(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut by_x = points.to_vec();
    by_x.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    ys.push(1.0);
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let rank = |y: f64| ys.partition_point(|&v| v < y);
    // counts[r] = number of inserted points whose y has rank r
    let mut counts = vec![0usize; ys.len()];
    let mut worst = 0.0f64;
    // sweep x over every point, then the right edge; points left of the
    // current x are already counted
    for next in by_x.iter().map(Some).chain([None]) {
        let u = next.map_or(1.0, |p| p[0]);
        let mut open = 0usize;
        let mut closed_extra = 0usize;
        let extra_rank = next.map(|p| rank(p[1]));
        for (r, &v) in ys.iter().enumerate() {
            let vol = u * v;
            worst = worst.max(vol - open as f64 / n as f64);
            open += counts[r];
            if extra_rank == Some(r) {
                closed_extra = 1;
            }
            worst = worst.max((open + closed_extra) as f64 / n as f64 - vol);
        }
        if let Some(r) = extra_rank {
            counts[r] += 1;
        }
    }
    worst
}

#[test]
fn discrepancy_oracle_on_tiny_sets() {
    assert!((star_discrepancy(&[[0.5, 0.5]]) - 0.75).abs() < 1e-15);
    let grid = [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]];
    assert!((star_discrepancy(&grid) - 7.0 / 16.0).abs() < 1e-15);
}

#[test]
fn sobol_beats_pseudorandom_discrepancy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [256, 1024] {
        let sobol = sample::sobol_unit(2, n, 1).unwrap();
        let random: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let (ds, dr) = (star_discrepancy(&sobol), star_discrepancy(&random));
        assert!(ds < dr, "n={n}: sobol {ds} vs random {dr}");
    }
}

#[test]
fn noise_standard_deviation() {
    let problem = problems::advection_problem();
    let clean = sample::uniform_points(2, 100, &problem.bounds).unwrap();
    let noisy = sample::add_gaussian_noise(&clean, 0.05, 3).unwrap();
    for axis in 0..2 {
        let width = problem.bounds[axis].1 - problem.bounds[axis].0;
        let d: Vec<f64> = clean.points.iter().zip(&noisy.points).map(|(a, b)| b[axis] - a[axis]).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        assert!((sd / (0.05 * width) - 1.0).abs() < 0.03, "axis {axis}: {sd}");
    }
}
