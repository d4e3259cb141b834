mod common;

use frgc::analysis::{
    asymptotic_code_length, avg_code_length, default_table, interval_code_length,
};
use frgc::bitcoder::{code_length, GolombParam};
use frgc::harness::{gen_synthetic_stream, run_fig6, ExperimentSpec};
use frgc::qmap::{map_residual, residual, round_prediction};
use frgc::{FinitePrecision, Precision};
use proptest::prelude::*;

/// Grids whose spacing divides 1/2, so integers sit on the grid and the
/// shifted-interval model describes the real coder exactly.
fn half_dividing_precision() -> impl Strategy<Value = FinitePrecision> {
    (1u64..=8, 1u64..=8).prop_map(|(rho, k)| FinitePrecision::new(rho, 2 * rho * k).unwrap())
}

proptest! {
    #[test]
    fn interval_model_matches_coder(
        x in -1000i32..1000,
        eps in -30.0f64..30.0,
        p in half_dividing_precision(),
        m in 1u64..=64,
    ) {
        let xhat = f64::from(x) - eps;
        let eps = f64::from(x) - xhat;
        let q = round_prediction(xhat, p).unwrap();
        let coded = code_length(map_residual(residual(x, q).unwrap()).value(), GolombParam::new(m).unwrap());
        prop_assert_eq!(interval_code_length(eps, m, Precision::Finite(p)), coded);
    }

    #[test]
    fn closed_form_matches_integration(
        theta in 0.05f64..0.95,
        m in 1u64..=8,
        which in 0usize..4,
    ) {
        let p = [
            Precision::Asymptotic,
            Precision::finite(1, 1).unwrap(),
            Precision::finite(1, 4).unwrap(),
            Precision::finite(3, 10).unwrap(),
        ][which];
        let want = common::integrate_code_length(m, theta, p);
        let got = avg_code_length(m, theta, p).unwrap();
        prop_assert!((got - want).abs() < 1e-6, "{} vs {}", got, want);
    }

    #[test]
    fn lookup_is_an_argmin(theta in 0.0005f64..0.98) {
        let table = default_table();
        let l = |m| asymptotic_code_length(m, theta).unwrap();
        let best = (1..=64).map(l).fold(f64::INFINITY, f64::min);
        prop_assert!(l(table.lookup(theta)) <= best + 1e-12);
    }
}

#[test]
fn measured_length_agrees_with_closed_form_within_three_se() {
    let table = default_table();
    for (i, theta) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let (xs, preds) = gen_synthetic_stream(theta, 100_000, 128, 21, i as u64).unwrap();
        let m = table.lookup(theta);
        let g = GolombParam::new(m).unwrap();
        for tau in [2, 4, 8, 16] {
            let p = FinitePrecision::new(1, tau).unwrap();
            let lens: Vec<f64> = xs
                .iter()
                .zip(&preds)
                .map(|(&x, &xh)| {
                    let q = round_prediction(xh, p).unwrap();
                    code_length(map_residual(residual(x, q).unwrap()).value(), g) as f64
                })
                .collect();
            let n = lens.len() as f64;
            let mean = lens.iter().sum::<f64>() / n;
            let var = lens.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let model = avg_code_length(m, theta, Precision::Finite(p)).unwrap();
            assert!(
                (mean - model).abs() <= 3.0 * se,
                "theta={theta} 1/{tau}: {mean} vs {model} (se {se})"
            );
        }
    }
}

#[test]
fn redundancy_curves_have_expected_shape() {
    let points = run_fig6(&ExperimentSpec::fig6(1, 100_000)).unwrap();
    let curve = |p: &str| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter(|pt| pt.precision.to_string() == p)
            .map(|pt| (pt.theta, pt.redundancy_pct))
            .collect()
    };
    let fine = curve("1/16");
    assert_eq!(fine.len(), 97);
    assert!(fine.iter().all(|&(_, r)| r < 0.5), "{fine:?}");
    let four_fifths = curve("4/5");
    let half = curve("1/2");
    for ((t, a), (_, b)) in four_fifths
        .iter()
        .zip(&half)
        .filter(|((t, _), _)| *t <= 0.3)
    {
        assert!(a < b, "theta={t}: 4/5 {a} vs 1/2 {b}");
    }
}
