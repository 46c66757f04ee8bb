//! Dense Cholesky with the crate-wide jitter policy.

use nalgebra::DMatrix;

use crate::error::{GfbmError, Result};

/// Strict lower Cholesky of `m + jitter I`: every pivot must be strictly
/// positive. Returns `None` when the matrix is not positive definite at
/// this jitter level.
pub(crate) fn strict_cholesky(m: &DMatrix<f64>, jitter: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut l = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut d = m[(k, k)] + jitter;
        for r in 0..k {
            d -= l[(k, r)] * l[(k, r)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let lk = d.sqrt();
        l[(k, k)] = lk;
        for i in (k + 1)..n {
            let mut s = m[(i, k)];
            for r in 0..k {
                s -= l[(i, r)] * l[(k, r)];
            }
            l[(i, k)] = s / lk;
        }
    }
    Some(l)
}

/// Escalates jitter geometrically (x10) from `base_jitter` until the strict
/// factorization succeeds, capped at `1e-6 trace / n`.
pub(crate) fn jittered_cholesky(
    m: &DMatrix<f64>,
    base_jitter: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    let mean_diag = m.diagonal().sum() / n as f64;
    let cap = 1e-6 * mean_diag;
    let mut jitter = base_jitter;
    loop {
        if let Some(l) = strict_cholesky(m, jitter) {
            return Ok((l, jitter));
        }
        let next = if jitter > 0.0 {
            jitter * 10.0
        } else {
            (mean_diag * 1e-15).max(f64::MIN_POSITIVE)
        };
        if next > cap || !next.is_finite() {
            return Err(GfbmError::NotFactorizable {
                jitter_reached: jitter,
                cap,
            });
        }
        jitter = next;
    }
}

/// Solves `L L^T x = b` in place from a lower factor.
pub(crate) fn cholesky_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    // forward
    for i in 0..n {
        let mut s = y[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    // backward with L^T
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s -= l[(j, i)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    y
}
