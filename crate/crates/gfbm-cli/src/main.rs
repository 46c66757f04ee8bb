//! Command-line front end: drives the covariance, simulation, spectral,
//! rate-functional, and ladder-experiment modules and emits CSV/JSON for
//! external plotting.
//!
//! Exit codes: 0 success, 2 configuration/validation, 3 numeric failure,
//! 4 I/O. Errors are mirrored as one JSON object on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gfbm::error::GfbmError;
use gfbm::grid::TimeGrid;
use gfbm::io;
use gfbm::kernelcov::{cov_matrix, CovKind};
use gfbm::lamperti::SpectralTable;
use gfbm::lilharness::{estimate_limsup, run_lil_experiment, LilFunctional, ScaleLadder};
use gfbm::params::GfbmParams;
use gfbm::pathsim::{increment_ensemble, x_path_ensemble};
use gfbm::quad::QuadratureSpec;
use gfbm::rkhs::{endpoint_weights, extreme_path, linear_sup, LimitCov};

mod config;
mod selftest;

const VERSION: &str = concat!("gfbm ", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "gfbm", version, about = "Numerical laboratory for generalized fractional Brownian motion")]
struct Cli {
    /// Flat key=value configuration file; explicit flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (0 = auto).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Covariance matrix of the process on a grid.
    Cov(CovArgs),
    /// Exact Gaussian path or increment ensembles.
    Simulate(SimulateArgs),
    /// Spectral density table of the Lamperti transform.
    Spectral(SpectralArgs),
    /// Rate-functional suprema of the local limit process.
    Rkhs(RkhsArgs),
    /// Running-max ladder experiment for the local LIL.
    Lil(LilArgs),
    /// Closed-form oracle suite; prints a pass/fail table.
    Selftest,
}

#[derive(Args)]
struct CovArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: f64,
    /// Comma-separated sample times.
    #[arg(long)]
    grid: String,
    /// Kernel: x, z, y, or limit-fbm.
    #[arg(long, default_value = "x")]
    kind: String,
    #[arg(long, default_value = "gfbm_cov.csv")]
    out: PathBuf,
    #[arg(long, default_value = "gfbm_cov.json")]
    manifest: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: f64,
    /// path: sample the process on --grid; increment: sample the normalized
    /// increment family at (--t0, --h) on a uniform offset grid.
    #[arg(long, default_value = "path")]
    mode: String,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long)]
    h: Option<f64>,
    /// Offset-grid size for increment mode.
    #[arg(long, default_value_t = 33)]
    x_points: usize,
    #[arg(long, default_value_t = 100)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "gfbm_paths.csv")]
    out: PathBuf,
    #[arg(long, default_value = "gfbm_paths.json")]
    manifest: PathBuf,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 200.0)]
    lambda_max: f64,
    #[arg(long, default_value_t = 4001)]
    points: usize,
    #[arg(long, default_value = "gfbm_spectral.csv")]
    out: PathBuf,
    #[arg(long, default_value = "gfbm_spectral.json")]
    manifest: PathBuf,
}

#[derive(Args)]
struct RkhsArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    /// Uniform offset-grid size on [0, 1].
    #[arg(long, default_value_t = 17)]
    grid_points: usize,
    /// Use the endpoint functional (weight 1 at x = 1).
    #[arg(long, default_value_t = false)]
    endpoint: bool,
    /// Comma-separated weights over the positive grid points.
    #[arg(long)]
    weights: Option<String>,
    /// Optional JSON output with the supremum and its witness path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LilArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: f64,
    /// Comma-separated base points.
    #[arg(long, default_value = "1")]
    t0: String,
    /// endpoint, sup-abs, delta-increment, or double-sup.
    #[arg(long, default_value = "endpoint")]
    functional: String,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long)]
    kmin: u32,
    #[arg(long)]
    kmax: u32,
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    #[arg(long)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 33)]
    x_points: usize,
    #[arg(long, default_value = "gfbm_lil.csv")]
    out: PathBuf,
    #[arg(long, default_value = "gfbm_lil_summary.json")]
    summary: PathBuf,
}

/// CLI failure with its exit-code class.
pub enum CliError {
    Validation(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<GfbmError> for CliError {
    fn from(e: GfbmError) -> Self {
        use GfbmError::*;
        let msg = e.to_string();
        match e {
            InvalidParams { .. }
            | InvalidGrid { .. }
            | InvalidIncrementQuery { .. }
            | GridMismatch { .. }
            | GridTooCoarse { .. }
            | TooFewScales { .. }
            | OutOfRange { .. }
            | BandOutOfTable { .. }
            | TargetOutsideBall { .. }
            | NormalizerUndefined { .. }
            | NotLilRegime { .. }
            | Serialization { .. } => CliError::Validation(msg),
            Quadrature(_)
            | NotFactorizable { .. }
            | ExtrapolationUnstable { .. }
            | SingularCovariance
            | NonPositiveValues { .. }
            | InsufficientTailSamples { .. } => CliError::Numeric(msg),
        }
    }
}

impl From<gfbm::quad::QuadError> for CliError {
    fn from(e: gfbm::quad::QuadError) -> Self {
        CliError::from(GfbmError::from(e))
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad {what} entry {p:?}: {e}")))
        })
        .collect()
}

fn tolerances_json() -> serde_json::Value {
    let spec = QuadratureSpec::default();
    json!({
        "rel_tol": spec.rel_tol,
        "abs_tol": spec.abs_tol,
        "max_subdivisions": spec.max_subdivisions,
    })
}

fn cmd_cov(args: &CovArgs) -> Result<(), CliError> {
    let params = GfbmParams::new(args.alpha, args.gamma)?;
    let grid = TimeGrid::new(parse_f64_list(&args.grid, "grid")?)?;
    let kind = match args.kind.as_str() {
        "x" => CovKind::X,
        "z" => CovKind::Z,
        "y" => CovKind::Y,
        "limit-fbm" => CovKind::LimitFbm,
        other => {
            return Err(CliError::Validation(format!(
                "unknown kind {other:?} (expected x, z, y, limit-fbm)"
            )))
        }
    };
    let m = cov_matrix(&params, &grid, kind)?;
    write_file(&args.out, &io::cov_to_csv(&m))?;
    let manifest = json!({
        "version": VERSION,
        "command": "cov",
        "params": params,
        "grid": grid.times(),
        "kind": kind,
        "tolerances": tolerances_json(),
        "entries": (0..grid.len())
            .map(|i| (0..grid.len()).map(|j| m.entries[(i, j)]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    });
    write_file(
        &args.manifest,
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    println!("wrote {} and {}", args.out.display(), args.manifest.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let params = GfbmParams::new(args.alpha, args.gamma)?;
    if args.paths < 1 {
        return Err(CliError::Validation("need at least one path".into()));
    }
    let (ensemble, mode_json) = match args.mode.as_str() {
        "path" => {
            let grid_str = args
                .grid
                .as_ref()
                .ok_or_else(|| CliError::Validation("path mode needs --grid".into()))?;
            let grid = TimeGrid::new(parse_f64_list(grid_str, "grid")?)?;
            let e = x_path_ensemble(&params, &grid, args.paths, args.seed)?;
            (e, json!({"mode": "path"}))
        }
        "increment" => {
            let h = args
                .h
                .ok_or_else(|| CliError::Validation("increment mode needs --h".into()))?;
            let x_grid = TimeGrid::unit_grid(args.x_points)?;
            let e = increment_ensemble(&params, args.t0, h, &x_grid, args.paths, args.seed)?;
            (e, json!({"mode": "increment", "t0": args.t0, "h": h}))
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown mode {other:?} (expected path, increment)"
            )))
        }
    };
    write_file(&args.out, &io::ensemble_to_csv(&ensemble))?;
    let manifest = json!({
        "version": VERSION,
        "command": "simulate",
        "mode": mode_json,
        "ensemble": io::EnsembleManifest::new(&params, &ensemble),
        "tolerances": tolerances_json(),
    });
    write_file(
        &args.manifest,
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    println!("wrote {} and {}", args.out.display(), args.manifest.display());
    Ok(())
}

fn cmd_spectral(args: &SpectralArgs) -> Result<(), CliError> {
    let params = GfbmParams::new(args.alpha, args.gamma)?;
    let table = SpectralTable::build(
        &params,
        args.lambda_max,
        args.points,
        &QuadratureSpec::default(),
    )?;
    write_file(&args.out, &io::spectral_to_csv(&table))?;
    let manifest = json!({
        "version": VERSION,
        "command": "spectral",
        "manifest": io::SpectralManifest::new(&table),
        "tolerances": tolerances_json(),
    });
    write_file(
        &args.manifest,
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    println!("wrote {} and {}", args.out.display(), args.manifest.display());
    Ok(())
}

fn cmd_rkhs(args: &RkhsArgs) -> Result<(), CliError> {
    let params = GfbmParams::new(args.alpha, args.gamma)?;
    if args.grid_points < 2 {
        return Err(CliError::Validation("need at least two grid points".into()));
    }
    let x_grid: Vec<f64> = (0..args.grid_points)
        .map(|i| i as f64 / (args.grid_points - 1) as f64)
        .collect();
    let cov = LimitCov::new(&params, args.t0, &x_grid)?;
    let weights = if let Some(w) = &args.weights {
        parse_f64_list(w, "weights")?
    } else if args.endpoint {
        endpoint_weights(&cov)?
    } else {
        return Err(CliError::Validation(
            "need --endpoint or --weights".into(),
        ));
    };
    let sup = linear_sup(&weights, &cov)?;
    let witness = extreme_path(&weights, &cov)?;
    println!("linear_sup = {sup:.6}");
    if let Some(out) = &args.out {
        let doc = json!({
            "version": VERSION,
            "command": "rkhs",
            "params": params,
            "t0": args.t0,
            "grid_points": args.grid_points,
            "c21": cov.c21,
            "weights": weights,
            "linear_sup": sup,
            "extreme_path": witness,
        });
        write_file(out, &serde_json::to_string_pretty(&doc).expect("doc serializes"))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_lil(args: &LilArgs) -> Result<(), CliError> {
    let params = GfbmParams::new(args.alpha, args.gamma)?;
    let t0_list = parse_f64_list(&args.t0, "t0")?;
    let ladder = ScaleLadder::new(args.theta, args.kmin, args.kmax)?;
    let functional = match args.functional.as_str() {
        "endpoint" => LilFunctional::Endpoint,
        "sup-abs" => LilFunctional::SupAbs,
        "delta-increment" => LilFunctional::DeltaIncrement { delta: args.delta },
        "double-sup" => LilFunctional::DoubleSup { delta: args.delta },
        other => {
            return Err(CliError::Validation(format!(
                "unknown functional {other:?} (expected endpoint, sup-abs, delta-increment, double-sup)"
            )))
        }
    };
    let x_grid = TimeGrid::unit_grid(args.x_points)?;
    let reports = run_lil_experiment(
        &params,
        &t0_list,
        &ladder,
        &functional,
        &x_grid,
        args.paths,
        args.seed,
    )?;
    write_file(&args.out, &io::lil_reports_to_csv(&reports))?;

    let mut summaries = Vec::new();
    for report in &reports {
        if report.ladder.n_scales() >= 10 {
            let s = estimate_limsup(report)?;
            summaries.push(
                serde_json::to_value(io::LilSummaryDocument::new(report, &s))
                    .expect("summary serializes"),
            );
        }
    }
    let doc = json!({
        "version": VERSION,
        "command": "lil",
        "params": params,
        "t0_list": t0_list,
        "ladder": ladder,
        "functional": functional,
        "n_paths": args.paths,
        "master_seed": args.seed,
        "x_points": args.x_points,
        "tolerances": tolerances_json(),
        "summaries": summaries,
    });
    write_file(
        &args.summary,
        &serde_json::to_string_pretty(&doc).expect("summary serializes"),
    )?;
    println!("wrote {} and {}", args.out.display(), args.summary.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        // a failure here means a pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match &cli.command {
        Command::Cov(args) => cmd_cov(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Spectral(args) => cmd_spectral(args),
        Command::Rkhs(args) => cmd_rkhs(args),
        Command::Lil(args) => cmd_lil(args),
        Command::Selftest => selftest::run(),
    }
}

fn emit_error(err: &CliError) {
    let doc = json!({
        "error": {
            "kind": err.kind(),
            "message": err.message(),
        }
    });
    eprintln!("{doc}");
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::apply_config_file(argv) {
        Ok(v) => v,
        Err(msg) => {
            let err = CliError::Validation(msg);
            emit_error(&err);
            return ExitCode::from(err.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            let err = CliError::Validation(e.to_string());
            emit_error(&err);
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_error(&e);
            ExitCode::from(e.exit_code())
        }
    }
}
