//! Finite-dimensional rate functional of the local limit process, Strassen
//! ball membership, and exact suprema of linear functionals over the ball.
//!
//! The limit of the normalized increment family is `sqrt(2 c21) B^{a+1/2}`;
//! on a grid the rate functional is the covariance quadratic form
//! `I(z) = z^T Sigma^{-1} z / 2` over the positive offsets (`z(0) = 0` is
//! structural). Grid projection lower-bounds the functional and is
//! nondecreasing under refinement, which is the computable surrogate the
//! experiments need.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::kernelcov::{c21, rho_limit_given};
use crate::linalg::{cholesky_solve, jittered_cholesky};
use crate::params::GfbmParams;

/// Function sampled on a grid of relative offsets including `x = 0`, where
/// its value is pinned to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(x_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if x_grid.len() != values.len() {
            return Err(GfbmError::GridMismatch {
                reason: format!(
                    "{} grid points vs {} values",
                    x_grid.len(),
                    values.len()
                ),
            });
        }
        if x_grid.is_empty() || x_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GfbmError::InvalidGrid {
                reason: "offset grid must be nonempty and strictly increasing".into(),
            });
        }
        if x_grid[0] != 0.0 {
            return Err(GfbmError::InvalidGrid {
                reason: "offset grid must start at x = 0".into(),
            });
        }
        if values[0] != 0.0 {
            return Err(GfbmError::InvalidGrid {
                reason: format!("value at x = 0 must be exactly 0 (got {})", values[0]),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GfbmError::InvalidGrid {
                reason: "non-finite value".into(),
            });
        }
        Ok(Self { x_grid, values })
    }

    /// Values at the positive offsets.
    pub fn positive_values(&self) -> &[f64] {
        &self.values[1..]
    }
}

/// Covariance of the normalized limit process on a grid of offsets.
///
/// Entries are `t0^g rho_{t0}(x_i, x_j)` over `x > 0` (the `x = 0`
/// row is degenerate and excluded): the `t0^{-g}` of the limit covariance
/// is cancelled by the normalization of the increment family, which makes
/// every derived supremum exactly independent of `t0`.
#[derive(Debug, Clone)]
pub struct LimitCov {
    pub x_grid: Vec<f64>,
    pub t0: f64,
    pub c21: f64,
    /// Positive-offset block.
    pub sigma: DMatrix<f64>,
}

impl LimitCov {
    pub fn new(params: &GfbmParams, t0: f64, x_grid: &[f64]) -> Result<Self> {
        params.require_lil_regime()?;
        if !(t0 > 0.0) {
            return Err(GfbmError::InvalidGrid {
                reason: format!("t0 = {t0} must be positive"),
            });
        }
        if x_grid.is_empty() || x_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GfbmError::InvalidGrid {
                reason: "offset grid must be nonempty and strictly increasing".into(),
            });
        }
        if x_grid[0] < 0.0 || *x_grid.last().unwrap() > 1.0 {
            return Err(GfbmError::InvalidGrid {
                reason: "offsets must lie in [0, 1]".into(),
            });
        }
        let c = c21(params)?;
        let pos: Vec<f64> = x_grid.iter().cloned().filter(|&x| x > 0.0).collect();
        let n = pos.len();
        let tg = t0.powf(params.gamma());
        let sigma = DMatrix::from_fn(n, n, |i, j| {
            tg * rho_limit_given(c, params, t0, pos[i], pos[j])
        });
        Ok(Self {
            x_grid: x_grid.to_vec(),
            t0,
            c21: c,
            sigma,
        })
    }

    fn positive_grid(&self) -> Vec<f64> {
        self.x_grid.iter().cloned().filter(|&x| x > 0.0).collect()
    }

    fn check_grid_match(&self, z: &GridFunction) -> Result<()> {
        if z.x_grid == self.x_grid {
            Ok(())
        } else {
            Err(GfbmError::GridMismatch {
                reason: "function grid differs from covariance grid".into(),
            })
        }
    }
}

/// Finite-dimensional rate functional `I(z) = z^T Sigma^{-1} z / 2` over
/// the positive offsets. Lower-bounds the true functional; nondecreasing
/// under grid refinement.
pub fn rate_functional(z: &GridFunction, cov: &LimitCov) -> Result<f64> {
    cov.check_grid_match(z)?;
    let zp = z.positive_values();
    if zp.is_empty() {
        return Ok(0.0);
    }
    let (lower, _) =
        jittered_cholesky(&cov.sigma, 0.0).map_err(|_| GfbmError::SingularCovariance)?;
    let y = cholesky_solve(&lower, zp);
    Ok(0.5 * zp.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>())
}

/// Membership in the Strassen ball `{z : I(z) <= 1}` with slack `tol`.
pub fn in_strassen_ball(z: &GridFunction, cov: &LimitCov, tol: f64) -> Result<bool> {
    Ok(rate_functional(z, cov)? <= 1.0 + tol)
}

/// `sup { a . z : I(z) <= 1 } = sqrt(2 a^T Sigma a)`: the predicted
/// limsup constant for the linear functional with weights `a` over the
/// positive offsets.
pub fn linear_sup(a: &[f64], cov: &LimitCov) -> Result<f64> {
    if a.len() != cov.sigma.nrows() {
        return Err(GfbmError::GridMismatch {
            reason: format!(
                "{} weights vs {} positive grid points",
                a.len(),
                cov.sigma.nrows()
            ),
        });
    }
    if a.iter().all(|&w| w == 0.0) {
        return Err(GfbmError::InvalidGrid {
            reason: "weights must not all vanish".into(),
        });
    }
    let av = DVector::from_column_slice(a);
    let quad = (&cov.sigma * &av).dot(&av);
    Ok((2.0 * quad).sqrt())
}

/// The argmax witness `z* = Sigma a sqrt(2 / a^T Sigma a)`: attains
/// `a . z* = linear_sup(a)` with `I(z*) = 1`.
pub fn extreme_path(a: &[f64], cov: &LimitCov) -> Result<GridFunction> {
    let sup = linear_sup(a, cov)?; // validates a
    let av = DVector::from_column_slice(a);
    let sa = &cov.sigma * &av;
    let quad = sa.dot(&av);
    let scale = (2.0 / quad).sqrt();
    let mut x_grid = vec![0.0];
    let mut values = vec![0.0];
    x_grid.extend(cov.positive_grid());
    values.extend(sa.iter().map(|v| v * scale));
    debug_assert!(((av.dot(&DVector::from_column_slice(&values[1..]))) - sup).abs() < 1e-9);
    GridFunction::new(x_grid, values)
}

/// Weights selecting the endpoint `x = 1` (must be the last grid point).
pub fn endpoint_weights(cov: &LimitCov) -> Result<Vec<f64>> {
    let pos = cov.positive_grid();
    if pos.last() != Some(&1.0) {
        return Err(GfbmError::InvalidGrid {
            reason: "endpoint functional needs x = 1 on the grid".into(),
        });
    }
    let mut a = vec![0.0; pos.len()];
    *a.last_mut().unwrap() = 1.0;
    Ok(a)
}
