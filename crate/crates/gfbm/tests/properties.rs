//! Property tests for the crate-wide invariants that hold on whole input
//! ranges rather than at isolated points.

use proptest::prelude::*;

use gfbm::grid::TimeGrid;
use gfbm::io::format_float;
use gfbm::kernelcov::rho_limit_given;
use gfbm::lilharness::{eval_functional, LilFunctional};
use gfbm::params::GfbmParams;
use gfbm::rkhs::{extreme_path, linear_sup, rate_functional, LimitCov};
use gfbm::stats::{ks_statistic_two_sample, neumaier_sum};

proptest! {
    // validation accepts exactly the admissible parameter region
    #[test]
    fn params_gate_matches_domain(alpha in -1.5f64..1.5, gamma in -0.5f64..1.5) {
        let admissible = (0.0..1.0).contains(&gamma)
            && alpha > -0.5 + gamma / 2.0
            && alpha < 0.5 + gamma / 2.0;
        prop_assert_eq!(GfbmParams::new(alpha, gamma).is_ok(), admissible);
    }

    // 17-significant-digit text form round-trips every finite f64 exactly
    #[test]
    fn float_format_lossless(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert_eq!(x.to_bits(), back.to_bits());
    }

    // t0^gamma * rho_{t0} is independent of t0 (exact scaling of the limit)
    #[test]
    fn rho_limit_t0_scaling(
        t0 in 0.1f64..10.0,
        x1 in 0.0f64..1.0,
        x2 in 0.0f64..1.0,
    ) {
        let params = GfbmParams::new(0.2, 0.3).unwrap();
        let c = 0.419; // any positive constant: the scaling is algebraic
        let a = rho_limit_given(c, &params, t0, x1, x2) * t0.powf(params.gamma());
        let b = rho_limit_given(c, &params, 1.0, x1, x2);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    // all four functionals are positively homogeneous
    #[test]
    fn functionals_positively_homogeneous(
        raw in prop::collection::vec(-5.0f64..5.0, 8),
        c in 0.01f64..100.0,
    ) {
        let n = raw.len() + 1;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mut path = vec![0.0];
        path.extend(raw);
        let scaled: Vec<f64> = path.iter().map(|v| c * v).collect();
        for f in [
            LilFunctional::Endpoint,
            LilFunctional::SupAbs,
            LilFunctional::DeltaIncrement { delta: 0.5 },
            LilFunctional::DoubleSup { delta: 0.5 },
        ] {
            let a = eval_functional(&f, &grid, &path).unwrap();
            let b = eval_functional(&f, &grid, &scaled).unwrap();
            prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    // grids accept exactly the strictly increasing finite sequences
    #[test]
    fn grid_gate(mut times in prop::collection::vec(-10.0f64..10.0, 1..12)) {
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let strictly = times.windows(2).all(|w| w[1] > w[0]);
        prop_assert_eq!(TimeGrid::new(times).is_ok(), strictly);
    }

    // two-sample KS distance is a [0, 1] statistic and vanishes on itself
    #[test]
    fn ks_statistic_range(
        a in prop::collection::vec(-100.0f64..100.0, 1..50),
        b in prop::collection::vec(-100.0f64..100.0, 1..50),
    ) {
        let d = ks_statistic_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(ks_statistic_two_sample(&a, &a), 0.0);
    }

    // compensated summation is exact on pair-cancelling inputs
    #[test]
    fn neumaier_exact_on_cancelling_pairs(xs in prop::collection::vec(-1e10f64..1e10, 1..20)) {
        let mut terms = Vec::new();
        for &x in &xs {
            terms.push(x);
        }
        for &x in xs.iter().rev() {
            terms.push(-x);
        }
        prop_assert_eq!(neumaier_sum(&terms), 0.0);
    }
}

// duality on the Brownian limit covariance: the witness attains the
// supremum and sits on the ball boundary, for arbitrary weights
#[test]
fn extreme_path_duality_property() {
    let params = GfbmParams::new(0.0, 0.0).unwrap();
    let x_grid: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
    let cov = LimitCov::new(&params, 1.0, &x_grid).unwrap();

    use proptest::strategy::ValueTree;
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = prop::collection::vec(-3.0f64..3.0, 8);
    for _ in 0..200 {
        let a = strategy.new_tree(&mut runner).unwrap().current();
        if a.iter().all(|&w| w.abs() < 1e-6) {
            continue;
        }
        let sup = linear_sup(&a, &cov).unwrap();
        let z = extreme_path(&a, &cov).unwrap();
        let attained: f64 = a
            .iter()
            .zip(z.positive_values())
            .map(|(w, v)| w * v)
            .sum();
        assert!((attained - sup).abs() < 1e-9 * sup.max(1.0));
        let rate = rate_functional(&z, &cov).unwrap();
        assert!((rate - 1.0).abs() < 1e-9, "I(z*) = {rate}");
    }
}
