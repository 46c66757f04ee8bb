//! CSV and JSON serialization of the numeric artifacts.
//!
//! Floats are written with 17 significant digits, which round-trips f64
//! exactly; JSON goes through serde_json, whose float formatting is also
//! shortest-exact. Parsers reject malformed documents rather than guessing.

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::grid::TimeGrid;
use crate::kernelcov::{CovKind, CovMatrix};
use crate::lamperti::SpectralTable;
use crate::lilharness::{LilReport, LimsupSummary};
use crate::params::GfbmParams;
use crate::pathsim::{Normalization, PathEnsemble};
use crate::rkhs::GridFunction;

/// 17 significant digits: lossless text form of an f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| GfbmError::Serialization {
        reason: format!("bad float {s:?}: {e}"),
    })
}

fn parse_row(line: &str) -> Result<Vec<f64>> {
    line.split(',').map(parse_float).collect()
}

fn csv_line(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(format_float)
        .collect::<Vec<_>>()
        .join(",")
}

// ---- covariance matrices ----

/// First row: grid times. Subsequent rows: matrix rows.
pub fn cov_to_csv(m: &CovMatrix) -> String {
    let n = m.grid.len();
    let mut out = String::new();
    out.push_str(&csv_line(m.grid.times().iter().cloned()));
    out.push('\n');
    for i in 0..n {
        out.push_str(&csv_line((0..n).map(|j| m.entries[(i, j)])));
        out.push('\n');
    }
    out
}

pub fn cov_from_csv(s: &str, kind: CovKind) -> Result<CovMatrix> {
    let mut lines = s.lines().filter(|l| !l.trim().is_empty());
    let grid_row = lines.next().ok_or_else(|| GfbmError::Serialization {
        reason: "empty covariance CSV".into(),
    })?;
    let times = parse_row(grid_row)?;
    let n = times.len();
    let grid = TimeGrid::new(times)?;
    let mut entries = nalgebra::DMatrix::zeros(n, n);
    for (i, line) in lines.enumerate() {
        if i >= n {
            return Err(GfbmError::Serialization {
                reason: "too many matrix rows".into(),
            });
        }
        let row = parse_row(line)?;
        if row.len() != n {
            return Err(GfbmError::Serialization {
                reason: format!("row {i} has {} entries, want {n}", row.len()),
            });
        }
        for (j, v) in row.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(CovMatrix { grid, kind, entries })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CovDocument {
    pub params: GfbmParams,
    pub grid: Vec<f64>,
    pub kind: CovKind,
    pub entries: Vec<Vec<f64>>,
}

pub fn cov_to_json(params: &GfbmParams, m: &CovMatrix) -> String {
    let n = m.grid.len();
    let doc = CovDocument {
        params: *params,
        grid: m.grid.times().to_vec(),
        kind: m.kind,
        entries: (0..n)
            .map(|i| (0..n).map(|j| m.entries[(i, j)]).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("covariance document serializes")
}

pub fn cov_from_json(s: &str) -> Result<(GfbmParams, CovMatrix)> {
    let doc: CovDocument = serde_json::from_str(s).map_err(|e| GfbmError::Serialization {
        reason: e.to_string(),
    })?;
    let n = doc.grid.len();
    let grid = TimeGrid::new(doc.grid)?;
    if doc.entries.len() != n || doc.entries.iter().any(|r| r.len() != n) {
        return Err(GfbmError::Serialization {
            reason: "entries shape does not match grid".into(),
        });
    }
    let entries = nalgebra::DMatrix::from_fn(n, n, |i, j| doc.entries[i][j]);
    Ok((
        doc.params,
        CovMatrix {
            grid,
            kind: doc.kind,
            entries,
        },
    ))
}

// ---- path ensembles ----

/// Header row: grid times. One path per subsequent row.
pub fn ensemble_to_csv(e: &PathEnsemble) -> String {
    let mut out = String::new();
    out.push_str(&csv_line(e.grid.times().iter().cloned()));
    out.push('\n');
    for i in 0..e.n_paths() {
        out.push_str(&csv_line(e.path(i)));
        out.push('\n');
    }
    out
}

pub fn ensemble_values_from_csv(s: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut lines = s.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| GfbmError::Serialization {
        reason: "empty ensemble CSV".into(),
    })?;
    let grid = parse_row(header)?;
    let mut paths = Vec::new();
    for line in lines {
        let row = parse_row(line)?;
        if row.len() != grid.len() {
            return Err(GfbmError::Serialization {
                reason: "path length does not match header".into(),
            });
        }
        paths.push(row);
    }
    Ok((grid, paths))
}

/// Sidecar manifest with full provenance of an ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub params: GfbmParams,
    pub normalization: String,
    pub t0: Option<f64>,
    pub h: Option<f64>,
    pub divisor: Option<f64>,
    pub master_seed: u64,
    pub n_paths: usize,
    pub n_points: usize,
}

impl EnsembleManifest {
    pub fn new(params: &GfbmParams, e: &PathEnsemble) -> Self {
        let (normalization, t0, h, divisor) = match e.normalization {
            Normalization::Raw => ("raw".to_string(), None, None, None),
            Normalization::LilNormalized { t0, h, divisor } => {
                ("lil_normalized".to_string(), Some(t0), Some(h), Some(divisor))
            }
        };
        Self {
            params: *params,
            normalization,
            t0,
            h,
            divisor,
            master_seed: e.master_seed,
            n_paths: e.n_paths(),
            n_points: e.grid.len(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

// ---- spectral tables ----

/// Two columns: lambda, density.
pub fn spectral_to_csv(t: &SpectralTable) -> String {
    let mut out = String::from("lambda,density\n");
    for (l, f) in t.lambdas.iter().zip(&t.densities) {
        out.push_str(&format!("{},{}\n", format_float(*l), format_float(*f)));
    }
    out
}

pub fn spectral_values_from_csv(s: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lambdas = Vec::new();
    let mut densities = Vec::new();
    for (i, line) in s.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue; // header
        }
        let row = parse_row(line)?;
        if row.len() != 2 {
            return Err(GfbmError::Serialization {
                reason: format!("spectral row has {} columns, want 2", row.len()),
            });
        }
        lambdas.push(row[0]);
        densities.push(row[1]);
    }
    Ok((lambdas, densities))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralManifest {
    pub params: GfbmParams,
    pub t_max: f64,
    pub r0: f64,
    pub fitted_decay_rate: f64,
    pub lambda_max: f64,
    pub n_points: usize,
}

impl SpectralManifest {
    pub fn new(t: &SpectralTable) -> Self {
        Self {
            params: t.params,
            t_max: t.t_max,
            r0: t.r0,
            fitted_decay_rate: t.decay.rate,
            lambda_max: t.lambda_max(),
            n_points: t.lambdas.len(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

// ---- ladder reports ----

/// Columns: t0, k, h, functional, path_index, value, running_max.
pub fn lil_reports_to_csv(reports: &[LilReport]) -> String {
    let mut out = String::from("t0,k,h,functional,path_index,value,running_max\n");
    for r in reports {
        for (ki, k) in r.ladder.ks().enumerate() {
            let h = r.ladder.scale(k);
            for path in 0..r.n_paths {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    format_float(r.t0),
                    k,
                    format_float(h),
                    r.functional.name(),
                    path,
                    format_float(r.values[ki][path]),
                    format_float(r.running_max[ki][path]),
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LilCsvRow {
    pub t0: f64,
    pub k: u32,
    pub h: f64,
    pub functional: String,
    pub path_index: usize,
    pub value: f64,
    pub running_max: f64,
}

pub fn lil_rows_from_csv(s: &str) -> Result<Vec<LilCsvRow>> {
    let mut rows = Vec::new();
    for (i, line) in s.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(GfbmError::Serialization {
                reason: format!("ladder row has {} columns, want 7", parts.len()),
            });
        }
        rows.push(LilCsvRow {
            t0: parse_float(parts[0])?,
            k: parts[1].trim().parse().map_err(|e| GfbmError::Serialization {
                reason: format!("bad k: {e}"),
            })?,
            h: parse_float(parts[2])?,
            functional: parts[3].trim().to_string(),
            path_index: parts[4].trim().parse().map_err(|e| GfbmError::Serialization {
                reason: format!("bad path index: {e}"),
            })?,
            value: parse_float(parts[5])?,
            running_max: parse_float(parts[6])?,
        });
    }
    Ok(rows)
}

/// Summary document for one ladder report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LilSummaryDocument {
    pub params: GfbmParams,
    pub t0: f64,
    pub functional: String,
    pub n_paths: usize,
    pub master_seed: u64,
    pub estimate: f64,
    pub trend_slope: f64,
    pub band: (f64, f64),
    pub prediction_from_rkhs: Option<f64>,
}

impl LilSummaryDocument {
    pub fn new(report: &LilReport, summary: &LimsupSummary) -> Self {
        Self {
            params: report.params,
            t0: report.t0,
            functional: report.functional.name().to_string(),
            n_paths: report.n_paths,
            master_seed: report.master_seed,
            estimate: summary.estimate,
            trend_slope: summary.trend_slope,
            band: summary.band,
            prediction_from_rkhs: summary.prediction_from_rkhs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

// ---- limit covariances ----

/// Same conventions as covariance matrices: first row is the positive
/// offset grid, following rows are the normalized covariance block.
pub fn limit_cov_to_csv(cov: &crate::rkhs::LimitCov) -> String {
    let pos: Vec<f64> = cov.x_grid.iter().cloned().filter(|&x| x > 0.0).collect();
    let n = pos.len();
    let mut out = csv_line(pos);
    out.push('\n');
    for i in 0..n {
        out.push_str(&csv_line((0..n).map(|j| cov.sigma[(i, j)])));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LimitCovDocument {
    pub x_grid: Vec<f64>,
    pub t0: f64,
    pub c21: f64,
    pub sigma: Vec<Vec<f64>>,
}

pub fn limit_cov_to_json(cov: &crate::rkhs::LimitCov) -> String {
    let n = cov.sigma.nrows();
    let doc = LimitCovDocument {
        x_grid: cov.x_grid.clone(),
        t0: cov.t0,
        c21: cov.c21,
        sigma: (0..n)
            .map(|i| (0..n).map(|j| cov.sigma[(i, j)]).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("limit covariance serializes")
}

pub fn limit_cov_values_from_json(s: &str) -> Result<LimitCovDocument> {
    serde_json::from_str(s).map_err(|e| GfbmError::Serialization {
        reason: e.to_string(),
    })
}

// ---- grid functions ----

/// First row: offsets. Second row: values.
pub fn grid_function_to_csv(f: &GridFunction) -> String {
    let mut out = csv_line(f.x_grid.iter().cloned());
    out.push('\n');
    out.push_str(&csv_line(f.values.iter().cloned()));
    out.push('\n');
    out
}

pub fn grid_function_from_csv(s: &str) -> Result<GridFunction> {
    let mut lines = s.lines().filter(|l| !l.trim().is_empty());
    let xs = parse_row(lines.next().ok_or_else(|| GfbmError::Serialization {
        reason: "empty grid-function CSV".into(),
    })?)?;
    let vs = parse_row(lines.next().ok_or_else(|| GfbmError::Serialization {
        reason: "grid-function CSV missing value row".into(),
    })?)?;
    GridFunction::new(xs, vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelcov::cov_matrix;
    use crate::lilharness::{run_lil_experiment, LilFunctional, ScaleLadder};
    use crate::pathsim::x_path_ensemble;

    fn params() -> GfbmParams {
        GfbmParams::new(0.2, 0.3).unwrap()
    }

    #[test]
    fn float_format_roundtrips_exactly() {
        for x in [
            0.0,
            1.0 / 3.0,
            2.0_f64.powi(-30),
            -1.234567890123456e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
        ] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn cov_csv_roundtrip() {
        let grid = TimeGrid::new(vec![0.5, 1.0, 1.7]).unwrap();
        let m = cov_matrix(&params(), &grid, CovKind::X).unwrap();
        let csv = cov_to_csv(&m);
        let back = cov_from_csv(&csv, CovKind::X).unwrap();
        assert_eq!(m.grid.times(), back.grid.times());
        assert_eq!(m.entries, back.entries);
    }

    #[test]
    fn cov_json_roundtrip() {
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let m = cov_matrix(&params(), &grid, CovKind::Z).unwrap();
        let json = cov_to_json(&params(), &m);
        let (p2, back) = cov_from_json(&json).unwrap();
        assert_eq!(p2, params());
        assert_eq!(back.kind, CovKind::Z);
        assert_eq!(m.entries, back.entries);
    }

    #[test]
    fn ensemble_csv_roundtrip() {
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let e = x_path_ensemble(&params(), &grid, 8, 99).unwrap();
        let csv = ensemble_to_csv(&e);
        let (g, rows) = ensemble_values_from_csv(&csv).unwrap();
        assert_eq!(g, e.grid.times());
        assert_eq!(rows.len(), 8);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row, &e.path(i));
        }
        let manifest = EnsembleManifest::new(&params(), &e);
        let json = manifest.to_json();
        let back: EnsembleManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.master_seed, 99);
        assert_eq!(back.normalization, "raw");
    }

    #[test]
    fn lil_csv_roundtrip() {
        let ladder = ScaleLadder::dyadic(8, 10).unwrap();
        let grid = TimeGrid::unit_grid(3).unwrap();
        let reports = run_lil_experiment(
            &params(),
            &[1.0],
            &ladder,
            &LilFunctional::Endpoint,
            &grid,
            4,
            5,
        )
        .unwrap();
        let csv = lil_reports_to_csv(&reports);
        let rows = lil_rows_from_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3 * 4);
        assert_eq!(rows[0].k, 8);
        assert_eq!(rows[0].functional, "endpoint");
        // bit-exact values
        assert_eq!(rows[5].value, reports[0].values[1][1]);
        assert_eq!(rows[5].running_max, reports[0].running_max[1][1]);
    }

    #[test]
    fn grid_function_roundtrip() {
        let f = GridFunction::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.25, -1.5]).unwrap();
        let back = grid_function_from_csv(&grid_function_to_csv(&f)).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn limit_cov_serialization() {
        let cov = crate::rkhs::LimitCov::new(&GfbmParams::new(0.0, 0.0).unwrap(), 1.0, &[
            0.0, 0.5, 1.0,
        ])
        .unwrap();
        let csv = limit_cov_to_csv(&cov);
        assert_eq!(csv.lines().count(), 3); // grid + 2 rows
        let doc = limit_cov_values_from_json(&limit_cov_to_json(&cov)).unwrap();
        assert_eq!(doc.x_grid, cov.x_grid);
        assert_eq!(doc.sigma[1][1], cov.sigma[(1, 1)]);
    }

    #[test]
    fn malformed_documents_rejected() {
        assert!(cov_from_csv("", CovKind::X).is_err());
        assert!(cov_from_csv("1.0,2.0\n1.0\n", CovKind::X).is_err());
        assert!(grid_function_from_csv("0.0,1.0\n").is_err());
        assert!(cov_from_json("{\"bad\": 1}").is_err());
    }
}
