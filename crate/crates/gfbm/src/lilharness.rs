//! Monte Carlo realization of the local functional law of the iterated
//! logarithm at desk scale: dyadic scale ladders, path functionals,
//! running-max limsup estimators, cluster-distance checks against ball
//! members, and Gaussian tail diagnostics.
//!
//! Scales are sampled as independent ensembles per ladder index k (exact
//! joint simulation across 20+ scales needs the full cross-covariance,
//! which is hopelessly ill-conditioned); running maxima over independent
//! scales upper-bias the limsup estimate, and the acceptance bands carry
//! that bias.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::grid::TimeGrid;
use crate::params::GfbmParams;
use crate::pathsim::rng::derive;
use crate::pathsim::{increment_ensemble, LNLN_DOMAIN};
use crate::rkhs::{endpoint_weights, in_strassen_ball, linear_sup, GridFunction, LimitCov};
use crate::stats::{fit_line, median, quantile};

/// Geometric ladder of scales `h_k = theta^{-k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub theta: f64,
    pub k_min: u32,
    pub k_max: u32,
}

impl ScaleLadder {
    pub fn new(theta: f64, k_min: u32, k_max: u32) -> Result<Self> {
        if !(theta > 1.0) || !theta.is_finite() {
            return Err(GfbmError::InvalidGrid {
                reason: format!("theta = {theta} must exceed 1"),
            });
        }
        if k_min < 1 || k_min > k_max || k_max > 60 {
            return Err(GfbmError::InvalidGrid {
                reason: format!("need 1 <= k_min <= k_max <= 60 (got {k_min}, {k_max})"),
            });
        }
        Ok(Self {
            theta,
            k_min,
            k_max,
        })
    }

    /// Dyadic ladder, the default.
    pub fn dyadic(k_min: u32, k_max: u32) -> Result<Self> {
        Self::new(2.0, k_min, k_max)
    }

    pub fn scale(&self, k: u32) -> f64 {
        self.theta.powi(-(k as i32))
    }

    pub fn ks(&self) -> impl Iterator<Item = u32> {
        self.k_min..=self.k_max
    }

    pub fn n_scales(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    /// The coarsest scale must sit inside both the increment domain and the
    /// `ln ln` domain for every base point of the experiment.
    pub fn validate_for(&self, t0: f64) -> Result<()> {
        let h_top = self.scale(self.k_min);
        if h_top >= (t0 / 2.0).min(LNLN_DOMAIN) {
            return Err(GfbmError::InvalidGrid {
                reason: format!(
                    "coarsest scale {h_top} must be below min(t0/2, e^-e) for t0 = {t0}"
                ),
            });
        }
        Ok(())
    }
}

/// Path functionals of the normalized increment family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LilFunctional {
    /// `|path(1)|`: the pointwise law of the iterated logarithm.
    Endpoint,
    /// `sup_x |path(x)|`: local modulus of continuity.
    SupAbs,
    /// `max_{x <= 1-delta} |path(x+delta) - path(x)|`.
    DeltaIncrement { delta: f64 },
    /// `max_{x <= 1-delta, s <= delta} |path(x+s) - path(x)|`.
    DoubleSup { delta: f64 },
}

impl LilFunctional {
    fn delta(&self) -> Option<f64> {
        match self {
            LilFunctional::DeltaIncrement { delta } | LilFunctional::DoubleSup { delta } => {
                Some(*delta)
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LilFunctional::Endpoint => "endpoint",
            LilFunctional::SupAbs => "sup_abs",
            LilFunctional::DeltaIncrement { .. } => "delta_increment",
            LilFunctional::DoubleSup { .. } => "double_sup",
        }
    }
}

/// Evaluates a functional on one path sampled over `x_grid`.
pub fn eval_functional(f: &LilFunctional, x_grid: &[f64], values: &[f64]) -> Result<f64> {
    debug_assert_eq!(x_grid.len(), values.len());
    if let Some(delta) = f.delta() {
        if !(0.0 < delta && delta < 1.0) {
            return Err(GfbmError::InvalidGrid {
                reason: format!("delta = {delta} outside (0, 1)"),
            });
        }
        let max_spacing = x_grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max);
        if delta < 2.0 * max_spacing {
            return Err(GfbmError::GridTooCoarse {
                delta,
                spacing: max_spacing,
            });
        }
    }
    let tol = 1e-12;
    match f {
        LilFunctional::Endpoint => {
            let last = *x_grid.last().unwrap();
            if (last - 1.0).abs() > tol {
                return Err(GfbmError::InvalidGrid {
                    reason: "endpoint functional needs x = 1 on the grid".into(),
                });
            }
            Ok(values.last().unwrap().abs())
        }
        LilFunctional::SupAbs => Ok(values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))),
        LilFunctional::DeltaIncrement { delta } => {
            let mut best = 0.0_f64;
            for (i, &x) in x_grid.iter().enumerate() {
                if x > 1.0 - delta + tol {
                    break;
                }
                let target = x + delta;
                // resolve x + delta to the nearest grid point
                let j = x_grid
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        (*a - target).abs().partial_cmp(&(*b - target).abs()).unwrap()
                    })
                    .map(|(j, _)| j)
                    .unwrap();
                best = best.max((values[j] - values[i]).abs());
            }
            Ok(best)
        }
        LilFunctional::DoubleSup { delta } => {
            let mut best = 0.0_f64;
            for (i, &x) in x_grid.iter().enumerate() {
                if x > 1.0 - delta + tol {
                    break;
                }
                for j in i..x_grid.len() {
                    if x_grid[j] - x > delta + tol {
                        break;
                    }
                    best = best.max((values[j] - values[i]).abs());
                }
            }
            Ok(best)
        }
    }
}

/// Per-scale functional values and running maxima for one base point.
#[derive(Debug, Clone)]
pub struct LilReport {
    pub params: GfbmParams,
    pub t0: f64,
    pub ladder: ScaleLadder,
    pub functional: LilFunctional,
    pub n_paths: usize,
    pub master_seed: u64,
    pub x_grid: Vec<f64>,
    /// `values[k_index][path]`.
    pub values: Vec<Vec<f64>>,
    /// `running_max[k_index][path]`: max of `values[0..=k_index][path]`.
    pub running_max: Vec<Vec<f64>>,
    /// Median of the running max at each scale.
    pub medians: Vec<f64>,
    /// Central 80% band of the running max at each scale.
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
}

impl LilReport {
    pub fn scales(&self) -> Vec<f64> {
        self.ladder.ks().map(|k| self.ladder.scale(k)).collect()
    }
}

/// Runs the ladder experiment for each base point in `t0_list`. Scale `k`
/// of base point `i` draws an independent ensemble seeded by
/// `derive(derive(master_seed, i), k)`, so two runs with the same single
/// `t0` share sub-seeds scale by scale.
pub fn run_lil_experiment(
    params: &GfbmParams,
    t0_list: &[f64],
    ladder: &ScaleLadder,
    functional: &LilFunctional,
    x_grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<LilReport>> {
    params.require_lil_regime()?;
    if t0_list.is_empty() {
        return Err(GfbmError::InvalidGrid {
            reason: "need at least one base point".into(),
        });
    }
    for &t0 in t0_list {
        ladder.validate_for(t0)?;
    }

    let mut reports = Vec::with_capacity(t0_list.len());
    for (it0, &t0) in t0_list.iter().enumerate() {
        let t0_seed = derive(master_seed, it0 as u64);
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(ladder.n_scales());
        for k in ladder.ks() {
            let seed_k = derive(t0_seed, k as u64);
            let ensemble =
                increment_ensemble(params, t0, ladder.scale(k), x_grid, n_paths, seed_k)?;
            let row: Vec<f64> = (0..n_paths)
                .into_par_iter()
                .map(|i| eval_functional(functional, x_grid.times(), &ensemble.path(i)))
                .collect::<Result<Vec<f64>>>()?;
            values.push(row);
        }

        let mut running_max = Vec::with_capacity(values.len());
        let mut prev: Vec<f64> = vec![f64::NEG_INFINITY; n_paths];
        for row in &values {
            let cur: Vec<f64> = row.iter().zip(&prev).map(|(v, p)| v.max(*p)).collect();
            prev = cur.clone();
            running_max.push(cur);
        }

        let medians: Vec<f64> = running_max.iter().map(|r| median(r)).collect();
        let q10: Vec<f64> = running_max.iter().map(|r| quantile(r, 0.1)).collect();
        let q90: Vec<f64> = running_max.iter().map(|r| quantile(r, 0.9)).collect();

        reports.push(LilReport {
            params: *params,
            t0,
            ladder: *ladder,
            functional: *functional,
            n_paths,
            master_seed,
            x_grid: x_grid.times().to_vec(),
            values,
            running_max,
            medians,
            q10,
            q90,
        });
    }
    Ok(reports)
}

/// Truncated-limsup summary of a ladder report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LimsupSummary {
    /// Median over paths of the running max at the deepest scale.
    pub estimate: f64,
    /// Residual-growth diagnostic: least-squares slope of the median
    /// running max against `1/ln k` over the top half of the ladder,
    /// sign-flipped so it is nonnegative while the maxima are still
    /// climbing toward the extrapolated limit.
    pub trend_slope: f64,
    /// Central 80% band of the running max at the deepest scale.
    pub band: (f64, f64),
    /// `linear_sup` prediction for the endpoint functional, when applicable.
    pub prediction_from_rkhs: Option<f64>,
}

pub fn estimate_limsup(report: &LilReport) -> Result<LimsupSummary> {
    let n_scales = report.ladder.n_scales();
    if n_scales < 10 {
        return Err(GfbmError::TooFewScales {
            scales: n_scales,
            required: 10,
        });
    }
    let last = n_scales - 1;
    let estimate = report.medians[last];
    let band = (report.q10[last], report.q90[last]);

    let ks: Vec<u32> = report.ladder.ks().collect();
    let top_half: Vec<usize> = (n_scales / 2..n_scales).collect();
    let xs: Vec<f64> = top_half
        .iter()
        .map(|&i| 1.0 / f64::from(ks[i]).ln())
        .collect();
    let ys: Vec<f64> = top_half.iter().map(|&i| report.medians[i]).collect();
    let trend_slope = -fit_line(&xs, &ys).slope;

    let prediction_from_rkhs = match report.functional {
        LilFunctional::Endpoint => {
            let cov = LimitCov::new(&report.params, report.t0, &report.x_grid)?;
            let a = endpoint_weights(&cov)?;
            Some(linear_sup(&a, &cov)?)
        }
        _ => None,
    };

    Ok(LimsupSummary {
        estimate,
        trend_slope,
        band,
        prediction_from_rkhs,
    })
}

/// Per-target sup-norm clustering distances.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterDistance {
    pub target_index: usize,
    /// Min over all paths and all scales.
    pub min_distance: f64,
    /// Min over paths at each scale.
    pub per_k_min: Vec<f64>,
}

/// For each Strassen-ball target, reports the minimum sup-norm distance to
/// the sampled increment paths. A decreasing trend in the available ladder
/// depth is the finite-sample surrogate for almost-sure clustering.
pub fn strassen_cluster_check(
    params: &GfbmParams,
    t0: f64,
    ladder: &ScaleLadder,
    targets: &[GridFunction],
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<ClusterDistance>> {
    params.require_lil_regime()?;
    ladder.validate_for(t0)?;
    if targets.is_empty() {
        return Err(GfbmError::InvalidGrid {
            reason: "need at least one target".into(),
        });
    }
    let x_grid = TimeGrid::new(targets[0].x_grid.clone())?;
    for (i, f) in targets.iter().enumerate() {
        if f.x_grid != targets[0].x_grid {
            return Err(GfbmError::GridMismatch {
                reason: format!("target {i} has a different offset grid"),
            });
        }
    }

    let cov = LimitCov::new(params, t0, x_grid.times())?;
    for (i, f) in targets.iter().enumerate() {
        if !in_strassen_ball(f, &cov, 1e-6)? {
            let rate = crate::rkhs::rate_functional(f, &cov)?;
            return Err(GfbmError::TargetOutsideBall { index: i, rate });
        }
    }

    let t0_seed = derive(master_seed, 0);
    let mut per_k: Vec<Vec<f64>> = vec![Vec::with_capacity(ladder.n_scales()); targets.len()];
    for k in ladder.ks() {
        let seed_k = derive(t0_seed, k as u64);
        let ensemble = increment_ensemble(params, t0, ladder.scale(k), &x_grid, n_paths, seed_k)?;
        for (ti, f) in targets.iter().enumerate() {
            let min_dist = (0..n_paths)
                .into_par_iter()
                .map(|i| {
                    let mut d = 0.0_f64;
                    for (j, fv) in f.values.iter().enumerate() {
                        d = d.max((ensemble.paths[(i, j)] - fv).abs());
                    }
                    d
                })
                .reduce(|| f64::INFINITY, f64::min);
            per_k[ti].push(min_dist);
        }
    }
    Ok(per_k
        .into_iter()
        .enumerate()
        .map(|(target_index, per_k_min)| ClusterDistance {
            target_index,
            min_distance: per_k_min.iter().cloned().fold(f64::INFINITY, f64::min),
            per_k_min,
        })
        .collect())
}

/// Quadratic-exponent fit of the empirical tail of `sup_x |U(x)|`.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    /// Fitted `c` in `P(sup |U| >= u) ~ exp(-c u^2)`.
    pub c_hat: f64,
    pub r_squared: f64,
    /// `(threshold, empirical tail probability)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    pub n_paths: usize,
}

/// Empirical check that the sup-norm tail is Gaussian: regression of
/// `-ln P(sup |U| >= u)` on `u^2` over the given thresholds. Thresholds
/// must stay where at least 10 exceedances are observed.
pub fn tail_diagnostic(
    params: &GfbmParams,
    t0: f64,
    h: f64,
    x_grid: &TimeGrid,
    n_paths: usize,
    thresholds: &[f64],
    master_seed: u64,
) -> Result<TailFit> {
    if thresholds.len() < 2 {
        return Err(GfbmError::InvalidGrid {
            reason: "need at least two thresholds".into(),
        });
    }
    let ensemble = increment_ensemble(params, t0, h, x_grid, n_paths, master_seed)?;
    let maxima: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            ensemble
                .path(i)
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .collect();

    let required = 10;
    let mut points = Vec::with_capacity(thresholds.len());
    for &u in thresholds {
        let count = maxima.iter().filter(|&&m| m >= u).count();
        if count < required {
            return Err(GfbmError::InsufficientTailSamples {
                threshold: u,
                count,
                required,
            });
        }
        points.push((u, count as f64 / n_paths as f64));
    }

    let xs: Vec<f64> = points.iter().map(|(u, _)| u * u).collect();
    let ys: Vec<f64> = points.iter().map(|(_, p)| -(p.ln())).collect();
    let fit = fit_line(&xs, &ys);
    Ok(TailFit {
        c_hat: fit.slope,
        r_squared: fit.r_squared,
        points,
        n_paths,
    })
}
