//! Small statistical helpers shared across modules: compensated summation,
//! rank statistics, least-squares fits, and Kolmogorov-Smirnov distances.

/// Neumaier-compensated sum; protects alternating-sign bilinear expansions.
pub fn neumaier_sum(terms: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Nearest-rank quantile of an unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Ordinary least squares of `y` on `x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points for a line fit");
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Asymptotic Kolmogorov critical constant: `D_crit = c(alpha)/sqrt(n)` for
/// one sample, `c(alpha) * sqrt((n+m)/(n m))` for two.
pub fn ks_critical_constant(significance: f64) -> f64 {
    assert!(significance > 0.0 && significance < 1.0);
    ((2.0 / significance).ln() / 2.0).sqrt()
}

/// One-sample KS distance of a sample against a reference CDF.
pub fn ks_statistic_against<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((i as f64 / n - f).abs());
    }
    d
}

/// Two-sample KS distance.
pub fn ks_statistic_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0_f64;
    while i < sa.len() && j < sb.len() {
        if sa[i] < sb[j] {
            i += 1;
        } else if sb[j] < sa[i] {
            j += 1;
        } else {
            // advance through the tied value in both samples together
            let v = sa[i];
            while i < sa.len() && sa[i] == v {
                i += 1;
            }
            while j < sb.len() && sb[j] == v {
                j += 1;
            }
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_sum() {
        let v = neumaier_sum(&[1.0, 1e-16, 1e-16, -1.0]);
        assert_eq!(v, 2e-16);
    }

    #[test]
    fn line_fit_exact_on_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a = [0.1, 0.5, 0.9, 1.4];
        assert_eq!(ks_statistic_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_critical_matches_reference() {
        // c(1e-3) = sqrt(ln(2000)/2)
        assert!((ks_critical_constant(1e-3) - 1.949_474_603_520_405_2).abs() < 1e-12);
    }

    #[test]
    fn quantiles_nearest_rank() {
        let v = [3.0, 1.0, 2.0];
        assert_eq!(median(&v), 2.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 3.0);
    }
}
