//! Closed-form oracle suite. Every row compares a computed quantity with
//! an analytically known value; output is deterministic (no timings), so
//! two runs are byte-identical.

use gfbm::grid::TimeGrid;
use gfbm::kernelcov::{c21, cov_x, cov_z, rho_limit};
use gfbm::lamperti::{r_u, spectral_density, SpectralTable};
use gfbm::lilharness::{run_lil_experiment, LilFunctional, ScaleLadder};
use gfbm::params::GfbmParams;
use gfbm::quad::{integrate_singular, QuadratureSpec};
use gfbm::rkhs::{endpoint_weights, linear_sup, LimitCov};

use crate::CliError;

struct Check {
    name: &'static str,
    expected: f64,
    computed: f64,
    rel_tol: f64,
}

impl Check {
    fn passed(&self) -> bool {
        let scale = self.expected.abs().max(1e-12);
        (self.computed - self.expected).abs() <= self.rel_tol * scale
    }
}

#[allow(clippy::vec_init_then_push)]
fn collect_checks() -> Result<Vec<Check>, CliError> {
    let spec = QuadratureSpec::default();
    let brownian = GfbmParams::new(0.0, 0.0)?;
    let para04 = GfbmParams::new(0.0, 0.4)?;
    let mut checks = Vec::new();

    checks.push(Check {
        name: "quadrature-beta(1/2,3/2)",
        expected: std::f64::consts::FRAC_PI_2,
        computed: integrate_singular(
            |u: f64| (1.0 - u).sqrt() * u.powf(-0.5),
            -0.5,
            0.5,
            0.0,
            1.0,
            &spec,
        )?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "brownian-min-kernel",
        expected: 0.3,
        computed: cov_x(&brownian, 0.3, 0.7)?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "z-closed-form(0,0.4)",
        expected: 0.5_f64.powf(0.6) / 0.6,
        computed: cov_z(&para04, 0.5, 1.0)?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "x-closed-form(0,0.4)",
        expected: 1.0 / 0.6,
        computed: cov_x(&para04, 1.0, 2.0)?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "c21-brownian",
        expected: 0.5,
        computed: c21(&brownian)?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "rho-limit-brownian",
        expected: 0.7,
        computed: rho_limit(&brownian, 1.0, 0.7, 0.7)?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "lamperti-beta(0.25,0.5)",
        expected: std::f64::consts::FRAC_PI_2,
        computed: r_u(&GfbmParams::new(0.25, 0.5)?, 0.0)?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "lamperti-exp(0,0.4)",
        expected: (-0.6_f64).exp() / 0.6,
        computed: r_u(&para04, 2.0)?,
        rel_tol: 1e-8,
    });
    checks.push(Check {
        name: "lorentzian-f0(0,0.4)",
        expected: 0.3 / (0.6 * std::f64::consts::PI * 0.09),
        computed: spectral_density(&para04, 0.0, 40.0, &spec)?,
        rel_tol: 1e-4,
    });
    let table = SpectralTable::build(&para04, 50.0, 1001, &spec)?;
    checks.push(Check {
        name: "tail-mass(0,0.4)-at-3",
        expected: (1.0 / 0.6) * (2.0 / std::f64::consts::PI) * 0.1_f64.atan(),
        computed: table.tail_mass(3.0)?,
        rel_tol: 1e-3,
    });
    let x_grid: Vec<f64> = (0..17).map(|i| i as f64 / 16.0).collect();
    let cov = LimitCov::new(&brownian, 1.0, &x_grid)?;
    checks.push(Check {
        name: "linear-sup-endpoint",
        expected: std::f64::consts::SQRT_2,
        computed: linear_sup(&endpoint_weights(&cov)?, &cov)?,
        rel_tol: 1e-8,
    });

    // determinism: two identically seeded ladder runs agree bitwise
    let ladder = ScaleLadder::dyadic(8, 10)?;
    let grid = TimeGrid::unit_grid(5)?;
    let run = |seed| {
        run_lil_experiment(
            &brownian,
            &[1.0],
            &ladder,
            &LilFunctional::Endpoint,
            &grid,
            16,
            seed,
        )
    };
    let a = run(7)?;
    let b = run(7)?;
    let identical = a[0].values == b[0].values && a[0].running_max == b[0].running_max;
    checks.push(Check {
        name: "seed-determinism",
        expected: 1.0,
        computed: if identical { 1.0 } else { 0.0 },
        rel_tol: 0.0,
    });

    Ok(checks)
}

pub fn run() -> Result<(), CliError> {
    let checks = collect_checks()?;
    println!(
        "{:<28} {:>16} {:>16} {:>8}",
        "check", "expected", "computed", "status"
    );
    let mut failed = 0usize;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        if !c.passed() {
            failed += 1;
        }
        println!(
            "{:<28} {:>16.9} {:>16.9} {:>8}",
            c.name, c.expected, c.computed, status
        );
    }
    println!("selftest: {}/{} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} selftest checks failed")));
    }
    Ok(())
}
