//! Point sets: Sobol sequences, uniform grids, boundary/initial samples
//! and Gaussian input noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::problems::PdeProblem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error("unsupported dimension {0} (only 1 and 2)")]
    Dimension(usize),
    #[error("need at least {min} points, got {got}")]
    TooFew { min: usize, got: usize },
    #[error("noise level must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("problem has no {0}")]
    Missing(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Sobol,
    Uniform,
    Boundary,
    Initial,
    Noisy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    /// Unused trailing coordinates are zero.
    pub points: Vec<[f64; 2]>,
    pub bounds: Vec<(f64, f64)>,
    pub provenance: Provenance,
    /// Boundary-segment index per point (boundary sets only).
    pub tags: Vec<usize>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(move |p| &p[..self.dim])
    }
}

fn check_dim(dim: usize) -> Result<(), SampleError> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(SampleError::Dimension(dim))
    }
}

const SOBOL_BITS: usize = 32;

/// Direction numbers for the first two Sobol dimensions. The first is the
/// van der Corput sequence; the second uses the primitive polynomial
/// `x + 1` with `m_1 = 1`.
fn direction_numbers() -> [[u32; SOBOL_BITS]; 2] {
    let mut v = [[0u32; SOBOL_BITS]; 2];
    for (k, v0) in v[0].iter_mut().enumerate() {
        *v0 = 1 << (31 - k);
    }
    v[1][0] = 1 << 31;
    for k in 1..SOBOL_BITS {
        v[1][k] = v[1][k - 1] ^ (v[1][k - 1] >> 1);
    }
    v
}

/// Raw Sobol points in `[0, 1)^dim`, Gray-code order, starting at index
/// `skip`.
pub fn sobol_unit(dim: usize, n: usize, skip: usize) -> Result<Vec<[f64; 2]>, SampleError> {
    check_dim(dim)?;
    let v = direction_numbers();
    let mut state = [0u32; 2];
    let mut out = Vec::with_capacity(n);
    let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
    for index in 0..skip + n {
        if index > 0 {
            // Lowest zero bit of index − 1 picks the direction number.
            let c = (!(index - 1)).trailing_zeros() as usize;
            for d in 0..dim {
                state[d] ^= v[d][c];
            }
        }
        if index >= skip {
            let mut p = [0.0; 2];
            for d in 0..dim {
                p[d] = state[d] as f64 * scale;
            }
            out.push(p);
        }
    }
    Ok(out)
}

/// Sobol points scaled to `bounds`.
pub fn sobol(dim: usize, n: usize, bounds: &[(f64, f64)], skip: usize) -> Result<PointSet, SampleError> {
    check_dim(dim)?;
    if n == 0 {
        return Err(SampleError::TooFew { min: 1, got: n });
    }
    let mut points = sobol_unit(dim, n, skip)?;
    for p in &mut points {
        for d in 0..dim {
            let (lo, hi) = bounds[d];
            p[d] = lo + (hi - lo) * p[d];
        }
    }
    Ok(PointSet { dim, points, bounds: bounds.to_vec(), provenance: Provenance::Sobol, tags: vec![] })
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i == n - 1 { hi } else { lo + step * i as f64 })
}

/// Evenly spaced points including both endpoints; in 2D an `n × n`
/// tensor grid with the first coordinate varying slowest.
pub fn uniform_points(dim: usize, n: usize, bounds: &[(f64, f64)]) -> Result<PointSet, SampleError> {
    check_dim(dim)?;
    if n < 2 {
        return Err(SampleError::TooFew { min: 2, got: n });
    }
    let points = if dim == 1 {
        linspace(bounds[0].0, bounds[0].1, n).map(|x| [x, 0.0]).collect()
    } else {
        let ys: Vec<f64> = linspace(bounds[1].0, bounds[1].1, n).collect();
        linspace(bounds[0].0, bounds[0].1, n).flat_map(|x| ys.iter().map(move |&y| [x, y])).collect()
    };
    Ok(PointSet { dim, points, bounds: bounds.to_vec(), provenance: Provenance::Uniform, tags: vec![] })
}

/// Interior residual points (Sobol, first all-zero point skipped).
pub fn residual_points(problem: &PdeProblem, n: usize) -> Result<PointSet, SampleError> {
    sobol(problem.dim(), n, &problem.bounds, 1)
}

/// `n` points split evenly over the boundary segments, remainder going to
/// the earlier segments. Each segment's free coordinate is Sobol-sampled;
/// point boundaries repeat their single point.
pub fn boundary_points(problem: &PdeProblem, n: usize) -> Result<PointSet, SampleError> {
    let segments = &problem.boundaries;
    if segments.is_empty() {
        return Err(SampleError::Missing("boundary segments"));
    }
    let dim = problem.dim();
    let mut points = Vec::with_capacity(n);
    let mut tags = Vec::with_capacity(n);
    for (s, seg) in segments.iter().enumerate() {
        let count = n / segments.len() + usize::from(s < n % segments.len());
        let free = match seg.free_axis {
            Some(axis) => sobol_unit(1, count, 1)?
                .into_iter()
                .map(|u| {
                    let (lo, hi) = problem.bounds[axis];
                    lo + (hi - lo) * u[0]
                })
                .collect(),
            None => vec![0.0; count],
        };
        for f in free {
            let mut p = [0.0; 2];
            p[seg.fixed_axis] = seg.fixed_value;
            if let Some(axis) = seg.free_axis {
                p[axis] = f;
            }
            points.push(p);
            tags.push(s);
        }
    }
    Ok(PointSet { dim, points, bounds: problem.bounds.clone(), provenance: Provenance::Boundary, tags })
}

/// Sobol points along the spatial axis at the initial time.
pub fn initial_points(problem: &PdeProblem, n: usize) -> Result<PointSet, SampleError> {
    let ic = problem.initial.ok_or(SampleError::Missing("initial condition"))?;
    let space = 1 - ic.time_axis;
    let (lo, hi) = problem.bounds[space];
    let t0 = problem.bounds[ic.time_axis].0;
    let points = sobol_unit(1, n, 1)?
        .into_iter()
        .map(|u| {
            let mut p = [0.0; 2];
            p[space] = lo + (hi - lo) * u[0];
            p[ic.time_axis] = t0;
            p
        })
        .collect();
    Ok(PointSet {
        dim: problem.dim(),
        points,
        bounds: problem.bounds.clone(),
        provenance: Provenance::Initial,
        tags: vec![],
    })
}

/// Perturbs every coordinate with independent `N(0, (σ·width)²)` noise,
/// `width` being that coordinate's extent in `points.bounds`.
pub fn add_gaussian_noise(points: &PointSet, sigma: f64, seed: u64) -> Result<PointSet, SampleError> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(SampleError::NegativeSigma(sigma));
    }
    let mut out = points.clone();
    out.provenance = Provenance::Noisy;
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for p in &mut out.points {
        for (x, &(lo, hi)) in p.iter_mut().zip(&points.bounds) {
            *x += sigma * (hi - lo) * normal.sample(&mut rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{advection_problem, helmholtz_problem, poisson_problem};

    #[test]
    fn van_der_corput_start() {
        let s = sobol(1, 3, &[(0.0, 1.0)], 1).unwrap();
        assert_eq!(s.points.iter().map(|p| p[0]).collect::<Vec<_>>(), vec![0.5, 0.75, 0.25]);
        let s2 = sobol(2, 1, &[(0.0, 1.0), (0.0, 1.0)], 1).unwrap();
        assert_eq!(s2.points[0], [0.5, 0.5]);
    }

    #[test]
    fn sobol_stays_in_unit_cube() {
        let pts = sobol_unit(2, 4096, 0).unwrap();
        assert!(pts.iter().all(|p| p.iter().all(|&c| (0.0..1.0).contains(&c))));
        assert!(sobol_unit(3, 4, 0).is_err());
    }

    #[test]
    fn uniform_grids() {
        let s = uniform_points(1, 3, &[(0.0, 1.0)]).unwrap();
        assert_eq!(s.points.iter().map(|p| p[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        let s = uniform_points(1, 500, &[(-3.0, 3.0)]).unwrap();
        assert!((s.points[1][0] - s.points[0][0] - 6.0 / 499.0).abs() < 1e-14);
        assert_eq!(s.points[499][0], 3.0);
        assert_eq!(uniform_points(2, 101, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap().len(), 10201);
        assert!(uniform_points(1, 1, &[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn boundary_splits() {
        let p = boundary_points(&poisson_problem(), 500).unwrap();
        assert_eq!(p.tags.iter().filter(|&&t| t == 0).count(), 250);
        assert!(p.points[..250].iter().all(|q| q[0] == p.points[0][0]));

        let a = boundary_points(&advection_problem(), 500).unwrap();
        assert_eq!(a.tags.iter().filter(|&&t| t == 1).count(), 250);
        assert!(a.points.iter().all(|q| (q[0] == 0.0 || q[0] == 1.0) && (0.0..=0.5).contains(&q[1])));

        let h = boundary_points(&helmholtz_problem(), 500).unwrap();
        for s in 0..4 {
            assert_eq!(h.tags.iter().filter(|&&t| t == s).count(), 125);
        }
        let odd = boundary_points(&helmholtz_problem(), 7).unwrap();
        assert_eq!(odd.tags, vec![0, 0, 1, 1, 2, 2, 3]);
    }

    #[test]
    fn initial_points_sit_on_the_initial_line() {
        let p = initial_points(&advection_problem(), 100).unwrap();
        assert!(p.points.iter().all(|q| q[1] == 0.0 && q[0] > 0.0 && q[0] < 1.0));
        assert!(initial_points(&poisson_problem(), 10).is_err());
    }

    #[test]
    fn noise_contract() {
        let grid = uniform_points(2, 100, &[(0.0, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(add_gaussian_noise(&grid, 0.0, 1).unwrap().points, grid.points);
        assert!(add_gaussian_noise(&grid, -0.1, 1).is_err());
        let a = add_gaussian_noise(&grid, 0.05, 9).unwrap();
        let b = add_gaussian_noise(&grid, 0.05, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance, Provenance::Noisy);
        for (d, width) in [(0, 2.0), (1, 1.0)] {
            let deltas: Vec<f64> = a.points.iter().zip(&grid.points).map(|(p, q)| p[d] - q[d]).collect();
            let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
            let var = deltas.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (deltas.len() - 1) as f64;
            let nominal = 0.05 * width;
            assert!((var.sqrt() / nominal - 1.0).abs() < 0.03, "coordinate {d}");
        }
    }
}
