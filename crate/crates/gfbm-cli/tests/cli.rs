//! End-to-end tests of the command-line interface: output schemas, exit
//! codes, configuration override, and the byte-identical determinism
//! acceptance check (selftest and a full ladder run repeated with the same
//! seed).

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn gfbm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gfbm"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    gfbm()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn cov_brownian_matrix_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["cov", "--alpha", "0", "--gamma", "0", "--grid", "0.5,1.0", "--kind", "x"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("gfbm_cov.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0], vec![0.5, 1.0]);
    for (got, want) in rows[1].iter().chain(rows[2].iter()).zip([0.5, 0.5, 0.5, 1.0]) {
        assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn cov_z_closed_form_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["cov", "--alpha", "0", "--gamma", "0.4", "--grid", "1,2", "--kind", "z"],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("gfbm_cov.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let c = 1.0 / 0.6;
    let c22 = 2.0_f64.powf(0.6) / 0.6; // 2.5261942775173301
    assert!((rows[1][0] - c).abs() < 1e-6);
    assert!((rows[1][1] - c).abs() < 1e-6);
    assert!((rows[2][1] - c22).abs() < 1e-6);
}

#[test]
fn invalid_alpha_exits_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["cov", "--alpha", "0.9", "--gamma", "0.4", "--grid", "1,2"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    let doc: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(doc["error"]["kind"], "validation");
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "cov",
            "--alpha",
            "0",
            "--gamma",
            "0",
            "--grid",
            "0.5,1.0",
            "--out",
            "no/such/dir/cov.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    let doc: serde_json::Value =
        serde_json::from_str(stderr(&out).lines().last().unwrap()).unwrap();
    assert_eq!(doc["error"]["kind"], "io");
}

#[test]
fn rkhs_prints_sqrt_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["rkhs", "--endpoint", "--alpha", "0", "--gamma", "0", "--grid-points", "17"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).contains("linear_sup = 1.414214"),
        "stdout: {}",
        stdout(&out)
    );
}

#[test]
fn spectral_matches_lorentzian() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "spectral",
            "--alpha",
            "0",
            "--gamma",
            "0.4",
            "--lambda-max",
            "50",
            "--points",
            "501",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("gfbm_spectral.csv")).unwrap();
    let mut sup = 0.0_f64;
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        let l: f64 = parts.next().unwrap().parse().unwrap();
        let f: f64 = parts.next().unwrap().parse().unwrap();
        let want = 0.3 / (0.6 * std::f64::consts::PI * (0.09 + l * l));
        sup = sup.max((f - want).abs());
    }
    assert!(sup < 1e-4, "sup error {sup}");
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("gfbm_spectral.json")).unwrap(),
    )
    .unwrap();
    assert!((manifest["manifest"]["r0"].as_f64().unwrap() - 1.0 / 0.6).abs() < 1e-6);
}

#[test]
fn config_file_with_cli_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.conf"),
        "alpha=0.2\ngamma=0.3\ngrid=0.5,1.0\nkind=z\n",
    )
    .unwrap();
    // config alone
    let out = run_in(dir.path(), &["cov", "--config", "run.conf"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("gfbm_cov.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["params"]["alpha"].as_f64().unwrap(), 0.2);
    assert_eq!(m["kind"], "z");
    // explicit flag overrides the config value
    let out = run_in(dir.path(), &["cov", "--config", "run.conf", "--alpha", "0.1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("gfbm_cov.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["params"]["alpha"].as_f64().unwrap(), 0.1);
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conf"), "alpha=0.2\nbogus_key=1\n").unwrap();
    let out = run_in(dir.path(), &["cov", "--config", "bad.conf", "--gamma", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus_key"));
}

#[test]
fn simulate_increment_writes_manifest_with_divisor() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "simulate", "--alpha", "0.2", "--gamma", "0.3", "--mode", "increment", "--t0",
            "1", "--h", "0.0009765625", "--x-points", "5", "--paths", "8", "--seed", "11",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("gfbm_paths.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["ensemble"]["normalization"], "lil_normalized");
    assert!(m["ensemble"]["divisor"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("gfbm_paths.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9); // header + 8 paths
    // x = 0 column is exactly zero
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').next().unwrap(), "0.0000000000000000e0");
    }
}

// acceptance criterion: selftest and a full ladder run repeated with the
// same seed produce byte-identical outputs
#[test]
fn determinism_byte_identical_runs() {
    let start = Instant::now();

    let dir = tempfile::tempdir().unwrap();
    let self1 = run_in(dir.path(), &["selftest"]);
    let self2 = run_in(dir.path(), &["selftest"]);
    assert!(self1.status.success(), "{}", stderr(&self1));
    assert_eq!(self1.stdout, self2.stdout, "selftest outputs differ");

    let lil_args = |out: &str, summary: &str| {
        vec![
            "lil".to_string(),
            "--alpha".into(),
            "0".into(),
            "--gamma".into(),
            "0".into(),
            "--t0".into(),
            "1".into(),
            "--functional".into(),
            "endpoint".into(),
            "--kmin".into(),
            "10".into(),
            "--kmax".into(),
            "30".into(),
            "--paths".into(),
            "2000".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out.into(),
            "--summary".into(),
            summary.into(),
        ]
    };
    let args1 = lil_args("run1.csv", "run1.json");
    let args2 = lil_args("run2.csv", "run2.json");
    let r1 = gfbm()
        .current_dir(dir.path())
        .args(&args1)
        .output()
        .unwrap();
    let r2 = gfbm()
        .current_dir(dir.path())
        .args(&args2)
        .output()
        .unwrap();
    assert!(r1.status.success(), "{}", stderr(&r1));
    assert!(r2.status.success(), "{}", stderr(&r2));
    let csv1 = std::fs::read(dir.path().join("run1.csv")).unwrap();
    let csv2 = std::fs::read(dir.path().join("run2.csv")).unwrap();
    assert_eq!(csv1, csv2, "ladder CSV outputs differ");
    let json1 = std::fs::read(dir.path().join("run1.json")).unwrap();
    let json2 = std::fs::read(dir.path().join("run2.json")).unwrap();
    assert_eq!(json1, json2, "ladder summaries differ");

    let dt = start.elapsed().as_secs_f64();
    println!("criterion 12 [determinism]: PASS ({dt:.2} s / 360 s)");
    assert!(dt < 360.0, "determinism check overran its budget: {dt:.1} s");
}

#[test]
fn lil_summary_contains_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "lil", "--alpha", "0", "--gamma", "0", "--t0", "1", "--functional", "endpoint",
            "--kmin", "10", "--kmax", "20", "--paths", "200", "--seed", "5",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("gfbm_lil_summary.json")).unwrap(),
    )
    .unwrap();
    let s = &doc["summaries"][0];
    let pred = s["prediction_from_rkhs"].as_f64().unwrap();
    assert!((pred - std::f64::consts::SQRT_2).abs() < 1e-6);
    assert!(s["estimate"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["version"], format!("gfbm {}", env!("CARGO_PKG_VERSION")));
}
