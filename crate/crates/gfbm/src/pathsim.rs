//! Exact Gaussian path simulation from Cholesky factors of covariance
//! matrices, with a deterministic parallel RNG contract: ensembles are a
//! pure function of `(covariance, n_paths, master_seed)` regardless of
//! worker count.
//!
//! Sampling is exact (no kernel discretization): local-oscillation
//! experiments read running maxima, and tail bias from an approximate
//! sampler would contaminate them.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GfbmError, Result};
use crate::grid::TimeGrid;
use crate::kernelcov::{cov_matrix, increment_cov_with, CovKind, CovMatrix};
use crate::linalg::jittered_cholesky;
use crate::params::GfbmParams;
use crate::quad::QuadratureSpec;

pub mod rng;

/// `e^{-e}`: the scale below which `ln ln(1/|h|) > 1`.
pub const LNLN_DOMAIN: f64 = 0.065_988_035_845_312_54;

/// Lower-triangular factor tied to the covariance it came from.
#[derive(Debug, Clone)]
pub struct CholFactor {
    pub lower: DMatrix<f64>,
    pub jitter_used: f64,
    /// Descriptor of the source covariance.
    pub grid: TimeGrid,
    pub kind: CovKind,
}

/// How a path ensemble is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Normalization {
    Raw,
    /// Increments divided by `t0^{-g/2} |h|^{a+1/2} (ln ln(1/|h|))^{1/2}`;
    /// the exact divisor used is recorded.
    LilNormalized { t0: f64, h: f64, divisor: f64 },
}

/// Matrix of simulated sample paths plus the provenance that produced it.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    /// Sample times, or relative offsets in `[0, 1]` for increment ensembles.
    pub grid: TimeGrid,
    /// `n_paths x n_points`.
    pub paths: DMatrix<f64>,
    pub master_seed: u64,
    pub normalization: Normalization,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.nrows()
    }

    /// Values of path `i` in grid order.
    pub fn path(&self, i: usize) -> Vec<f64> {
        self.paths.row(i).iter().cloned().collect()
    }

    /// Column of values at grid index `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.paths.column(j).iter().cloned().collect()
    }
}

/// Factors `cov + j I` with `j` escalating geometrically (x10) from
/// `base_jitter` until the strict factorization succeeds, capped at
/// `1e-6 trace / n`; the jitter actually used is recorded.
pub fn cholesky_with_jitter(cov: &CovMatrix, base_jitter: f64) -> Result<CholFactor> {
    let (lower, jitter_used) = jittered_cholesky(&cov.entries, base_jitter)?;
    Ok(CholFactor {
        lower,
        jitter_used,
        grid: cov.grid.clone(),
        kind: cov.kind,
    })
}

fn sample_rows(lower: &DMatrix<f64>, n_paths: usize, master_seed: u64) -> Vec<Vec<f64>> {
    let n = lower.nrows();
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::NormalStream::new(rng::derive(master_seed, i as u64));
            let g: Vec<f64> = (0..n).map(|_| stream.next_normal()).collect();
            (0..n)
                .map(|r| {
                    let mut s = 0.0;
                    for (c, gc) in g.iter().enumerate().take(r + 1) {
                        s += lower[(r, c)] * gc;
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Draws `n_paths` exact Gaussian paths from the factor: path `i` is
/// `L g_i` with `g_i` standard normal from a stream seeded by
/// `derive(master_seed, i)`. Bitwise independent of thread count.
pub fn sample_ensemble(factor: &CholFactor, n_paths: usize, master_seed: u64) -> PathEnsemble {
    assert!(n_paths >= 1, "need at least one path");
    let n = factor.lower.nrows();
    let rows = sample_rows(&factor.lower, n_paths, master_seed);
    let mut paths = DMatrix::zeros(n_paths, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            paths[(i, j)] = *v;
        }
    }
    PathEnsemble {
        grid: factor.grid.clone(),
        paths,
        master_seed,
        normalization: Normalization::Raw,
    }
}

/// Samples a Gaussian vector whose covariance has exact zero rows (degenerate
/// points like `t = 0`): the positive-variance block is factored and sampled,
/// degenerate coordinates stay exactly zero.
fn sample_with_zero_mask(
    grid: &TimeGrid,
    sub_cov: DMatrix<f64>,
    active: &[usize],
    n_paths: usize,
    master_seed: u64,
    normalization: Normalization,
) -> Result<PathEnsemble> {
    let (lower, _jitter) = if active.is_empty() {
        (DMatrix::zeros(0, 0), 0.0)
    } else {
        jittered_cholesky(&sub_cov, 0.0)?
    };
    let rows = sample_rows(&lower, n_paths, master_seed);
    let mut paths = DMatrix::zeros(n_paths, grid.len());
    for (i, row) in rows.iter().enumerate() {
        for (k, &col) in active.iter().enumerate() {
            paths[(i, col)] = row[k];
        }
    }
    Ok(PathEnsemble {
        grid: grid.clone(),
        paths,
        master_seed,
        normalization,
    })
}

/// Exact sampling of the process on a grid through its covariance matrix.
/// Grid points at `t = 0` yield exactly zero values.
pub fn x_path_ensemble(
    params: &GfbmParams,
    grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    assert!(n_paths >= 1, "need at least one path");
    grid.require_nonnegative()?;
    let cov = cov_matrix(params, grid, CovKind::X)?;
    let active: Vec<usize> = (0..grid.len())
        .filter(|&i| cov.entries[(i, i)] > 0.0)
        .collect();
    let sub = DMatrix::from_fn(active.len(), active.len(), |r, c| {
        cov.entries[(active[r], active[c])]
    });
    sample_with_zero_mask(grid, sub, &active, n_paths, master_seed, Normalization::Raw)
}

/// Samples the normalized increment family
/// `U(x) = (X(t0 + h x) - X(t0)) / (t0^{-g/2} |h|^{a+1/2} (ln ln(1/|h|))^{1/2})`
/// on relative offsets `x_grid` in `[0, 1]`. `U(0) = 0` exactly.
pub fn increment_ensemble(
    params: &GfbmParams,
    t0: f64,
    h: f64,
    x_grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    assert!(n_paths >= 1, "need at least one path");
    let h_abs = h.abs();
    if !(t0 > 0.0) || h == 0.0 || !h.is_finite() {
        return Err(GfbmError::InvalidIncrementQuery {
            reason: format!("need t0 > 0 and h != 0 (t0 = {t0}, h = {h})"),
        });
    }
    if h_abs >= LNLN_DOMAIN {
        return Err(GfbmError::NormalizerUndefined { h_abs });
    }
    if h_abs >= t0 / 2.0 {
        return Err(GfbmError::InvalidIncrementQuery {
            reason: format!("need |h| < t0/2 (|h| = {h_abs}, t0 = {t0})"),
        });
    }
    if x_grid.min_time() < 0.0 || x_grid.max_time() > 1.0 {
        return Err(GfbmError::InvalidGrid {
            reason: "relative offsets must lie in [0, 1]".into(),
        });
    }

    let lnln = (1.0 / h_abs).ln().ln();
    let divisor2 = t0.powf(-params.gamma()) * h_abs.powf(2.0 * params.alpha() + 1.0) * lnln;
    let divisor = divisor2.sqrt();

    let xs = x_grid.times();
    let active: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] > 0.0).collect();
    // raw increment covariances scale like divisor^2: the absolute tolerance
    // must follow, or at small h the integrals sit below it untouched
    let spec = QuadratureSpec {
        abs_tol: (1e-10 * divisor2).max(1e-300),
        ..QuadratureSpec::default()
    };
    let pairs: Vec<(usize, usize)> = (0..active.len())
        .flat_map(|r| (r..active.len()).map(move |c| (r, c)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(r, c)| {
            increment_cov_with(params, t0, h * xs[active[r]], h * xs[active[c]], &spec)
                .map(|v| v / divisor2)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sub = DMatrix::zeros(active.len(), active.len());
    for (&(r, c), &v) in pairs.iter().zip(values.iter()) {
        sub[(r, c)] = v;
        sub[(c, r)] = v;
    }

    sample_with_zero_mask(
        x_grid,
        sub,
        &active,
        n_paths,
        master_seed,
        Normalization::LilNormalized { t0, h, divisor },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64, gamma: f64) -> GfbmParams {
        GfbmParams::new(alpha, gamma).unwrap()
    }

    fn sample_cov(e: &PathEnsemble, i: usize, j: usize) -> f64 {
        let n = e.n_paths() as f64;
        let mut s = 0.0;
        for r in 0..e.n_paths() {
            s += e.paths[(r, i)] * e.paths[(r, j)];
        }
        s / n
    }

    #[test]
    fn brownian_two_point_factor_by_hand() {
        let params = p(0.0, 0.0);
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let cov = cov_matrix(&params, &grid, CovKind::X).unwrap();
        let f = cholesky_with_jitter(&cov, 0.0).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        let s = 0.5_f64.sqrt();
        for (got, want) in f.lower.iter().zip([s, s, 0.0, s]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        // L L^T reproduces the covariance
        let recon = &f.lower * f.lower.transpose();
        assert!((recon - &cov.entries).norm() < 1e-8 * cov.entries.norm());
    }

    #[test]
    fn zero_factor_gives_zero_paths() {
        let grid = TimeGrid::new(vec![1.0, 2.0]).unwrap();
        let f = CholFactor {
            lower: DMatrix::zeros(2, 2),
            jitter_used: 0.0,
            grid,
            kind: CovKind::X,
        };
        let e = sample_ensemble(&f, 7, 99);
        assert!(e.paths.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn determinism_same_seed_bitwise() {
        let params = p(0.2, 0.3);
        let grid = TimeGrid::new(vec![0.5, 1.0, 1.5]).unwrap();
        let a = x_path_ensemble(&params, &grid, 64, 123).unwrap();
        let b = x_path_ensemble(&params, &grid, 64, 123).unwrap();
        assert_eq!(a.paths, b.paths);
        let c = x_path_ensemble(&params, &grid, 64, 124).unwrap();
        assert_ne!(a.paths, c.paths);
    }

    #[test]
    fn brownian_sample_covariance_within_five_se() {
        let params = p(0.0, 0.0);
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let cov = cov_matrix(&params, &grid, CovKind::X).unwrap();
        let f = cholesky_with_jitter(&cov, 0.0).unwrap();
        let n = 10_000;
        let e = sample_ensemble(&f, n, 2024);
        // Var(hat C_tt) = 2 C_tt^2 / n for the diagonal
        let got = sample_cov(&e, 1, 1);
        let se = 1.0 * (2.0 / n as f64).sqrt();
        assert!(
            (got - 1.0).abs() < 5.0 * se,
            "sample var {got}, se {se}"
        );
    }

    #[test]
    fn x_ensemble_at_origin_is_zero() {
        let params = p(0.2, 0.3);
        let grid = TimeGrid::new(vec![0.0]).unwrap();
        let e = x_path_ensemble(&params, &grid, 5, 7).unwrap();
        assert!(e.paths.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn brownian_terminal_second_moment() {
        let params = p(0.0, 0.0);
        let grid = TimeGrid::new(vec![1.0]).unwrap();
        let n = 10_000;
        let e = x_path_ensemble(&params, &grid, n, 31).unwrap();
        let m2 = sample_cov(&e, 0, 0);
        let se = (2.0 / n as f64).sqrt();
        assert!((m2 - 1.0).abs() < 5.0 * se, "{m2}");
    }

    #[test]
    fn sample_covariance_matches_kernel_on_grid() {
        let params = p(0.2, 0.3);
        let grid = TimeGrid::uniform(0.25, 2.0, 8).unwrap();
        let cov = cov_matrix(&params, &grid, CovKind::X).unwrap();
        let n = 10_000;
        let e = x_path_ensemble(&params, &grid, n, 555).unwrap();
        for i in 0..8 {
            for j in i..8 {
                let got = sample_cov(&e, i, j);
                let want = cov.entries[(i, j)];
                // Wick: Var(hat C_ij) = (C_ii C_jj + C_ij^2)/n
                let se = ((cov.entries[(i, i)] * cov.entries[(j, j)] + want * want)
                    / n as f64)
                    .sqrt();
                assert!(
                    (got - want).abs() < 5.0 * se,
                    "({i},{j}): got {got}, want {want}, se {se}"
                );
            }
        }
    }

    #[test]
    fn increment_ensemble_zero_offset_column() {
        let params = p(0.2, 0.3);
        let grid = TimeGrid::unit_grid(5).unwrap();
        let e = increment_ensemble(&params, 1.0, 2.0_f64.powi(-10), &grid, 20, 8).unwrap();
        assert!(e.column(0).iter().all(|&v| v == 0.0));
        assert!(e.column(4).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn increment_ensemble_brownian_variance() {
        // Var U(1) = 1 / ln ln(2^20) = 0.3803410312150267
        let params = p(0.0, 0.0);
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let h = 2.0_f64.powi(-20);
        let n = 10_000;
        let e = increment_ensemble(&params, 1.0, h, &grid, n, 77).unwrap();
        let want = 0.380_341_031_215_026_7;
        let got = sample_cov(&e, 1, 1);
        let se = want * (2.0 / n as f64).sqrt();
        assert!((got - want).abs() < 5.0 * se, "got {got}, want {want}");
        match e.normalization {
            Normalization::LilNormalized { divisor, .. } => {
                let lnln = (1.0 / h).ln().ln();
                assert!((divisor - (h * lnln).sqrt()).abs() < 1e-15);
            }
            _ => panic!("expected lil normalization"),
        }
    }

    #[test]
    fn normalizer_domain_gate() {
        let params = p(0.0, 0.0);
        let grid = TimeGrid::unit_grid(3).unwrap();
        let err = increment_ensemble(&params, 1.0, 0.07, &grid, 2, 1).unwrap_err();
        assert!(matches!(err, GfbmError::NormalizerUndefined { .. }));
        // just below the domain boundary works
        assert!(increment_ensemble(&params, 1.0, 0.065, &grid, 2, 1).is_ok());
    }

    #[test]
    fn self_similarity_in_law() {
        // ensemble of X(2 t) 2^{-H} has the law of X on the base grid
        let params = p(0.2, 0.3);
        let scale = 2.0;
        let base = TimeGrid::new(vec![0.4, 0.8, 1.2]).unwrap();
        let scaled =
            TimeGrid::new(base.times().iter().map(|t| t * scale).collect()).unwrap();
        let cov = cov_matrix(&params, &base, CovKind::X).unwrap();
        let n = 10_000;
        let e = x_path_ensemble(&params, &scaled, n, 91).unwrap();
        let factor = scale.powf(-params.hurst());
        for i in 0..3 {
            for j in i..3 {
                let mut s = 0.0;
                for r in 0..n {
                    s += e.paths[(r, i)] * factor * e.paths[(r, j)] * factor;
                }
                let got = s / n as f64;
                let want = cov.entries[(i, j)];
                let se = ((cov.entries[(i, i)] * cov.entries[(j, j)] + want * want)
                    / n as f64)
                    .sqrt();
                assert!(
                    (got - want).abs() < 5.0 * se,
                    "({i},{j}): {got} vs {want} (se {se})"
                );
            }
        }
    }

    #[test]
    fn standardized_marginal_ks_against_normal() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let params = p(0.2, 0.3);
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let h = 2.0_f64.powi(-20);
        let n = 10_000;
        let e = increment_ensemble(&params, 1.0, h, &grid, n, 4242).unwrap();
        let col = e.column(2);
        let var = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let d = crate::stats::ks_statistic_against(
            &col.iter().map(|v| v / var.sqrt()).collect::<Vec<_>>(),
            |x| std_normal.cdf(x),
        );
        let crit = crate::stats::ks_critical_constant(1e-3) / (n as f64).sqrt();
        assert!(d < crit, "KS distance {d} >= {crit}");
    }
}
