//! Stationary Lamperti transform of the rough component: covariance,
//! spectral density by oscillation-aware cosine transform, spectral tail
//! functionals, and the out-of-band increment-variance split.
//!
//! `U(t) = e^{-tH} Z(e^t)` is stationary with
//!
//! ```text
//! r_U(t) = e^{-tH} int_0^1 (e^t - u)^a (1 - u)^a u^{-g} du,  t >= 0,
//! ```
//!
//! extended evenly, `r_U(0) = Beta(1-g, 2a+1)`, and `r_U(t)` decays like
//! `e^{-t(1-g)/2}`. Its spectral density is the cosine transform
//! `f_U(l) = (1/pi) int_0^inf r_U(t) cos(t l) dt`, computed with
//! piecewise-linear Filon weights (exact in the oscillation, so the panel
//! error does not grow with `l`) plus an analytic exponential-tail
//! correction from the fitted decay rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::kernelcov::pow_increment;
use crate::params::GfbmParams;
use crate::quad::{integrate_singular, QuadratureSpec};
use crate::stats::fit_line;

/// Lamperti covariance `r_U(t)`; even in `t`.
pub fn r_u(params: &GfbmParams, t: f64) -> Result<f64> {
    r_u_with(params, t, &QuadratureSpec::default())
}

pub fn r_u_with(params: &GfbmParams, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    let a = params.alpha();
    let g = params.gamma();
    let h = params.hurst();
    let t = t.abs(); // evenness hard-coded
    let et = t.exp();
    let right_exp = if t == 0.0 { 2.0 * a } else { a };
    let f = move |u: f64| (et - u).powf(a) * (1.0 - u).powf(a) * u.powf(-g);
    let v = integrate_singular(f, -g, right_exp, 0.0, 1.0, spec)?;
    Ok((-t * h).exp() * v)
}

/// Least-squares fit of `ln r_U(t) = ln amplitude + rate * t`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted exponential rate (negative for a decaying covariance).
    pub rate: f64,
    pub amplitude: f64,
    pub n_points: usize,
}

/// Fits the exponential decay rate of `r_U` on `t_grid` (typically within
/// `[5, 40]`). Errors with `NonPositiveValues` if `r_U <= 0` is encountered.
pub fn r_u_decay_check(params: &GfbmParams, t_grid: &[f64]) -> Result<DecayFit> {
    if t_grid.len() < 2 {
        return Err(GfbmError::InvalidGrid {
            reason: "decay fit needs at least two points".into(),
        });
    }
    let values: Vec<f64> = t_grid
        .iter()
        .map(|&t| r_u(params, t))
        .collect::<Result<Vec<f64>>>()?;
    let n_bad = values.iter().filter(|&&v| v <= 0.0).count();
    if n_bad > 0 {
        return Err(GfbmError::NonPositiveValues {
            count: n_bad,
            total: values.len(),
        });
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = fit_line(t_grid, &logs);
    Ok(DecayFit {
        rate: fit.slope,
        amplitude: fit.intercept.exp(),
        n_points: t_grid.len(),
    })
}

fn default_decay_grid() -> Vec<f64> {
    (0..36).map(|i| 5.0 + i as f64).collect()
}

/// Composite piecewise-linear Filon cosine transform over uniform nodes
/// `r_j = r(j dt)`, `j = 0..=n`:
/// `int_0^T r(t) cos(l t) dt = r_n sin(l T)/l
///   - (2 sin(l dt / 2) / (dt l^2)) sum_j (r_{j+1} - r_j) sin(l (t_j + dt/2))`.
/// Exact for piecewise-linear `r`, so the error is the interpolation error
/// of `r` alone, uniformly in `l`.
fn filon_cosine(nodes: &[f64], dt: f64, lambda: f64) -> f64 {
    let n = nodes.len() - 1;
    let t_end = n as f64 * dt;
    if lambda * t_end < 1e-8 {
        // effectively no oscillation: plain trapezoid
        let mut s = 0.5 * (nodes[0] + nodes[n]);
        for v in &nodes[1..n] {
            s += v;
        }
        return s * dt;
    }
    let mut osc = 0.0;
    for j in 0..n {
        let mid = (j as f64 + 0.5) * dt;
        osc += (nodes[j + 1] - nodes[j]) * (lambda * mid).sin();
    }
    nodes[n] * (lambda * t_end).sin() / lambda
        - 2.0 * (lambda * dt / 2.0).sin() / (dt * lambda * lambda) * osc
}

/// Analytic cosine transform of the exponential tail `A e^{-c t}` beyond `T`:
/// `int_T^inf A e^{-ct} cos(l t) dt = A e^{-cT} (c cos(lT) - l sin(lT)) / (c^2 + l^2)`.
fn exp_tail_cosine(r_at_t: f64, c: f64, t_end: f64, lambda: f64) -> f64 {
    r_at_t * (c * (lambda * t_end).cos() - lambda * (lambda * t_end).sin())
        / (c * c + lambda * lambda)
}

fn plan_nodes(
    params: &GfbmParams,
    t_max: f64,
    lambda_max: f64,
    spec: &QuadratureSpec,
) -> Result<(Vec<f64>, f64, f64, DecayFit)> {
    let decay = r_u_decay_check(params, &default_decay_grid())?;
    let c = -decay.rate;
    if !(c > 0.0) {
        return Err(GfbmError::Quadrature(crate::quad::QuadError::ToleranceNotMet {
            estimate: f64::NAN,
            error: f64::INFINITY,
            subdivisions: 0,
        }));
    }
    let r0 = r_u_with(params, 0.0, spec)?;
    // extend the window until the un-corrected tail bound A e^{-cT}/c is
    // far below the mass scale; the analytic correction then mops up the rest
    let needed = (decay.amplitude / (1e-10 * r0.max(1e-6) * c)).ln() / c;
    let t_end = t_max.max(needed).clamp(10.0, 400.0);
    let dt_cap = if lambda_max > 0.0 {
        (std::f64::consts::PI / (4.0 * lambda_max)).min(0.5)
    } else {
        0.5
    };
    let dt = dt_cap.min(0.015);
    let n = (t_end / dt).ceil() as usize;
    let dt = t_end / n as f64;
    let nodes: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|j| r_u_with(params, j as f64 * dt, spec))
        .collect::<Result<Vec<f64>>>()?;
    Ok((nodes, dt, t_end, decay))
}

/// Spectral density at a single frequency. `t_max` is a lower bound on the
/// transform window; the window is extended until the analytic tail bound
/// falls below tolerance.
pub fn spectral_density(
    params: &GfbmParams,
    lambda: f64,
    t_max: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(GfbmError::InvalidGrid {
            reason: format!("lambda = {lambda} must be nonnegative"),
        });
    }
    let (nodes, dt, t_end, decay) = plan_nodes(params, t_max, lambda, spec)?;
    let finite = filon_cosine(&nodes, dt, lambda);
    let tail = exp_tail_cosine(*nodes.last().unwrap(), -decay.rate, t_end, lambda);
    Ok((finite + tail) / std::f64::consts::PI)
}

/// Tabulated spectral density on `[0, lambda_max]`, linear below 1 and
/// log-spaced above, with the fitted power-law remainder beyond the table.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    pub lambdas: Vec<f64>,
    pub densities: Vec<f64>,
    pub params: GfbmParams,
    /// `r_U(0)`: total spectral mass.
    pub r0: f64,
    pub t_max: f64,
    pub decay: DecayFit,
    /// Fitted coefficient of the `C l^{-(2a+2)}` high-frequency tail.
    pub tail_coeff: f64,
}

impl SpectralTable {
    /// Default table: `lambda in [0, 200]`, 4001 points.
    pub fn default_build(params: &GfbmParams) -> Result<Self> {
        Self::build(params, 200.0, 4001, &QuadratureSpec::default())
    }

    pub fn build(
        params: &GfbmParams,
        lambda_max: f64,
        n_points: usize,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        if !(lambda_max > 0.0) || n_points < 16 {
            return Err(GfbmError::InvalidGrid {
                reason: format!(
                    "need lambda_max > 0 and n_points >= 16 (got {lambda_max}, {n_points})"
                ),
            });
        }
        let (nodes, dt, t_end, decay) = plan_nodes(params, 0.0, lambda_max, spec)?;
        let r0 = nodes[0];

        let lambdas = Self::lambda_grid(lambda_max, n_points);
        let r_last = *nodes.last().unwrap();
        let c = -decay.rate;
        let densities: Vec<f64> = lambdas
            .par_iter()
            .map(|&l| {
                (filon_cosine(&nodes, dt, l) + exp_tail_cosine(r_last, c, t_end, l))
                    / std::f64::consts::PI
            })
            .collect();

        // fitted high-frequency coefficient: median of f l^{2a+2} over the
        // top part of the table (median is robust to residual ripple)
        let exp_tail = 2.0 * params.alpha() + 2.0;
        let mut samples: Vec<f64> = lambdas
            .iter()
            .zip(&densities)
            .filter(|(l, _)| **l >= lambda_max / 4.0)
            .map(|(l, f)| f * l.powf(exp_tail))
            .collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tail_coeff = if samples.is_empty() {
            0.0
        } else {
            samples[samples.len() / 2]
        };

        Ok(Self {
            lambdas,
            densities,
            params: *params,
            r0,
            t_max: t_end,
            decay,
            tail_coeff,
        })
    }

    fn lambda_grid(lambda_max: f64, n_points: usize) -> Vec<f64> {
        if lambda_max <= 1.0 {
            return (0..n_points)
                .map(|i| lambda_max * i as f64 / (n_points - 1) as f64)
                .collect();
        }
        let n_lin = (n_points / 4).max(2);
        let n_log = n_points - n_lin;
        let mut grid: Vec<f64> = (0..n_lin).map(|i| i as f64 / n_lin as f64).collect();
        let log_max = lambda_max.ln();
        for i in 0..n_log {
            grid.push((log_max * (i + 1) as f64 / n_log as f64).exp());
        }
        grid[n_points - 1] = lambda_max;
        grid
    }

    pub fn lambda_max(&self) -> f64 {
        *self.lambdas.last().unwrap()
    }

    fn check_in_range(&self, u: f64) -> Result<()> {
        if u < 0.0 || u > self.lambda_max() {
            Err(GfbmError::OutOfRange {
                u,
                lambda_max: self.lambda_max(),
            })
        } else {
            Ok(())
        }
    }

    /// Linear interpolation of the tabulated density.
    pub fn density_at(&self, u: f64) -> Result<f64> {
        self.check_in_range(u)?;
        let i = match self
            .lambdas
            .binary_search_by(|l| l.partial_cmp(&u).unwrap())
        {
            Ok(i) => return Ok(self.densities[i]),
            Err(i) => i,
        };
        let (l0, l1) = (self.lambdas[i - 1], self.lambdas[i]);
        let w = (u - l0) / (l1 - l0);
        Ok(self.densities[i - 1] * (1.0 - w) + self.densities[i] * w)
    }

    /// Trapezoid integral of `weight(l) f(l)` over `[lo, hi]` within the table.
    fn trapz_weighted<W: Fn(f64) -> f64>(&self, lo: f64, hi: f64, weight: W) -> Result<f64> {
        debug_assert!(lo <= hi);
        let flo = self.density_at(lo)? * weight(lo);
        let fhi = self.density_at(hi)? * weight(hi);
        let mut prev_l = lo;
        let mut prev_v = flo;
        let mut sum = 0.0;
        for (l, f) in self.lambdas.iter().zip(&self.densities) {
            if *l <= lo || *l >= hi {
                continue;
            }
            let v = f * weight(*l);
            sum += 0.5 * (prev_v + v) * (l - prev_l);
            prev_l = *l;
            prev_v = v;
        }
        sum += 0.5 * (prev_v + fhi) * (hi - prev_l);
        Ok(sum)
    }

    /// Power-law remainder `2 int_x^inf C l^{-(2a+2)} dl` beyond the table.
    fn tail_remainder(&self, x: f64) -> f64 {
        let e = 2.0 * self.params.alpha() + 1.0;
        2.0 * self.tail_coeff * x.powf(-e) / e
    }

    /// `2 int_u^inf f_U` (table part plus declared remainder). Nonincreasing
    /// in `u`; `tail_mass(0)` recovers the total mass `r_U(0)` within 1%.
    pub fn tail_mass(&self, u: f64) -> Result<f64> {
        self.check_in_range(u)?;
        Ok(2.0 * self.trapz_weighted(u, self.lambda_max(), |_| 1.0)?
            + self.tail_remainder(self.lambda_max()))
    }

    /// `2 int_0^u l^2 f_U`; nondecreasing in `u`.
    pub fn low_second_moment(&self, u: f64) -> Result<f64> {
        self.check_in_range(u)?;
        Ok(2.0 * self.trapz_weighted(0.0, u, |l| l * l)?)
    }

    /// Total mass `2 int_0^inf f_U`.
    pub fn mass(&self) -> f64 {
        self.tail_mass(0.0).expect("0 is always in range")
    }
}

/// Frequency band `(d_lo, d_hi]`, either literally indexed by
/// `d_n = exp(n^{1+tau} + n^tau)` or a surrogate at representable
/// frequencies for scaling-law checks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandSpec {
    pub d_lo: f64,
    pub d_hi: f64,
    /// `(n, tau)` when the band follows the indexed construction.
    pub index: Option<(u32, f64)>,
}

impl BandSpec {
    /// The indexed band `(d_{n-1}, d_n]` with `d_n = exp(n^{1+tau} + n^tau)`.
    pub fn from_index(n: u32, tau: f64) -> Result<Self> {
        if n < 3 || !(0.0 < tau && tau < 1.0) {
            return Err(GfbmError::InvalidGrid {
                reason: format!("band index needs n >= 3 and tau in (0,1) (got {n}, {tau})"),
            });
        }
        let d_at = |k: f64| (k.powf(1.0 + tau) + k.powf(tau)).exp();
        let d_lo = d_at((n - 1) as f64);
        let d_hi = d_at(n as f64);
        if !d_hi.is_finite() {
            return Err(GfbmError::InvalidGrid {
                reason: format!("band cutoff overflows for n = {n}, tau = {tau}"),
            });
        }
        Ok(Self {
            d_lo,
            d_hi,
            index: Some((n, tau)),
        })
    }

    /// Surrogate band at explicit cutoffs; used to verify the
    /// `d^{-(2a+1)}` scaling law at representable frequencies.
    pub fn surrogate(d_lo: f64, d_hi: f64) -> Result<Self> {
        if !(0.0 < d_lo && d_lo < d_hi) {
            return Err(GfbmError::InvalidGrid {
                reason: format!("need 0 < d_lo < d_hi (got {d_lo}, {d_hi})"),
            });
        }
        Ok(Self {
            d_lo,
            d_hi,
            index: None,
        })
    }

    /// Scale `h_n = exp(-n^{1+tau})` paired with an indexed band.
    pub fn h_n(&self) -> Option<f64> {
        self.index
            .map(|(n, tau)| (-(n as f64).powf(1.0 + tau)).exp())
    }
}

/// The two pieces of the out-of-band increment variance
/// `E[(Z~(t0+s) - Z~(t0))^2]`: in-band-complement low-frequency part by
/// quadrature, high-frequency part bounded through the spectral tail.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandResidual {
    pub j1_bound_part: f64,
    pub j2_part: f64,
}

/// Splits the out-of-band increment variance at `|l| <= d_lo` and
/// `|l| > d_hi`:
/// `j1_bound_part = int_{|l|<=d_lo} |(t0+s)^H e^{il ln(t0+s)} - t0^H e^{il ln t0}|^2 f_U`,
/// `j2_part = 2 (t0^{2H} + (t0+s)^{2H}) tail_mass(d_hi) / 2`.
pub fn band_residual_variance(
    params: &GfbmParams,
    band: &BandSpec,
    t0: f64,
    s: f64,
    table: &SpectralTable,
) -> Result<BandResidual> {
    if !(t0 > 0.0) || t0 + s <= 0.0 {
        return Err(GfbmError::InvalidGrid {
            reason: format!("need t0 > 0 and t0 + s > 0 (t0 = {t0}, s = {s})"),
        });
    }
    if band.d_hi > table.lambda_max() {
        return Err(GfbmError::BandOutOfTable {
            d_hi: band.d_hi,
            lambda_max: table.lambda_max(),
        });
    }
    if let Some(h_n) = band.h_n() {
        if s.abs() > h_n {
            return Err(GfbmError::InvalidGrid {
                reason: format!("indexed band requires |s| <= h_n = {h_n} (s = {s})"),
            });
        }
    }
    if s == 0.0 {
        return Ok(BandResidual {
            j1_bound_part: 0.0,
            j2_part: 0.0,
        });
    }

    let h = params.hurst();
    let t0_h = t0.powf(h);
    let ts_h = t0_h + pow_increment(t0, s, h);
    let omega = (s / t0).ln_1p(); // l-phase: l * ln((t0+s)/t0)
    let dh = ts_h - t0_h;
    let cross = 2.0 * ts_h * t0_h;
    // |(t0+s)^H e^{il ln(t0+s)} - t0^H e^{il ln t0}|^2
    //   = (dh)^2 + 2 (t0+s)^H t0^H (1 - cos(l omega))
    let j1 = 2.0 * table.trapz_weighted(0.0, band.d_lo, |l| {
        let half = (0.5 * l * omega).sin();
        dh * dh + cross * 2.0 * half * half
    })?;

    let j2 = 2.0 * (t0.powf(2.0 * h) + (t0 + s).powf(2.0 * h)) * table.tail_mass(band.d_hi)?
        / 2.0;
    Ok(BandResidual {
        j1_bound_part: j1,
        j2_part: j2,
    })
}
