//! Property tests over random grids, forecasts and scenarios.

use proptest::prelude::*;

use crate::injection::{alpha_beta, reserves, sequential_injection, step_injection};
use crate::lp::{solve, LinearProgram, LpOptions, RowKind};
use crate::metrics::{metrics_for, MetricsOptions};
use crate::model::{DisturbanceForecast, DisturbanceScenario, GridParameters};
use crate::response::{derive_second_order, sequential_response, DerivedSecondOrder};
use crate::worst::{enumerate_scenarios, envelope_of};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

fn system() -> impl Strategy<Value = DerivedSecondOrder<f64>> {
    (2.0..40.0f64, 0.5..15.0f64, 2.0..20.0f64, 2.0..12.0f64)
        .prop_filter_map("underdamped", |(h, d, r, t)| derive_second_order(&GridParameters::new(h, d, r, t)).ok())
}

fn forecast(n: usize) -> impl Strategy<Value = DisturbanceForecast<f64>> {
    (
        prop::collection::vec(prop_oneof![-0.4..-0.01f64, 0.01..0.4f64], n),
        prop::collection::vec(0.05..1.0f64, n),
        20.0..90.0f64,
    )
        .prop_map(|(m, p, tau)| DisturbanceForecast::new(tau, m, p))
}

fn scenario(f: &DisturbanceForecast<f64>, picks: &[usize]) -> DisturbanceScenario<f64> {
    let o: Vec<f64> = picks.iter().map(|&k| f.candidate_offsets[k % 3]).collect();
    DisturbanceScenario::from_offsets(f.tau, &o)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn metrics_scale_with_magnitudes(d in system(), f in forecast(3), picks in prop::collection::vec(0usize..3, 3), k in 0.1..10.0f64) {
        let s = scenario(&f, &picks);
        let a = metrics_for(&s, &f, &d, MetricsOptions::default()).unwrap().as_array();
        let b = metrics_for(&s, &f.scaled(k), &d, MetricsOptions::default()).unwrap().as_array();
        for j in 0..3 {
            prop_assert!(rel(b[j], k * a[j]) < 1e-11 || a[j] == 0.0);
        }
    }

    #[test]
    fn sign_flip_keeps_metrics_and_swaps_reserves(d in system(), f in forecast(3), picks in prop::collection::vec(0usize..3, 3), h in 0.1..5.0f64, dd in 0.1..5.0f64) {
        let s = scenario(&f, &picks);
        let g = f.scaled(-1.0);
        let a = metrics_for(&s, &f, &d, MetricsOptions::default()).unwrap().as_array();
        let b = metrics_for(&s, &g, &d, MetricsOptions::default()).unwrap().as_array();
        for j in 0..3 {
            prop_assert!(rel(b[j], a[j]) < 1e-12 || a[j] == 0.0);
        }
        let step = Some(f.tau / 600.0);
        let r1 = reserves(&[sequential_injection(&s, &f, &d, h, dd).unwrap()], step);
        let r2 = reserves(&[sequential_injection(&s, &g, &d, h, dd).unwrap()], step);
        prop_assert!((r1.r_up + r2.r_down).abs() <= 1e-12 * r1.r_up.abs().max(1e-12));
        prop_assert!((r1.r_down + r2.r_up).abs() <= 1e-12 * r1.r_down.abs().max(1e-12));
    }

    #[test]
    fn envelope_dominates_every_scenario(d in system(), f in forecast(3)) {
        let all = enumerate_scenarios(&f, 1000).unwrap();
        let env = envelope_of(&all, &f, &d, MetricsOptions::default()).unwrap().as_metrics().as_array();
        for s in &all {
            let m = metrics_for(s, &f, &d, MetricsOptions::default()).unwrap().as_array();
            for j in 0..3 {
                prop_assert!(m[j] <= env[j]);
            }
        }
    }

    #[test]
    fn trajectories_are_continuous(d in system(), f in forecast(4), picks in prop::collection::vec(0usize..3, 4)) {
        let s = scenario(&f, &picks);
        let tr = sequential_response(&s, &f, &d).unwrap();
        let scale = tr.segments.iter().map(|g| g.kernel.offset.abs()).fold(1e-12, f64::max);
        for w in tr.segments.windows(2) {
            let t = w[1].start;
            let left = w[0].value(t);
            prop_assert!((left - w[1].value(t)).abs() <= 1e-12 * scale.max(left.abs()));
        }
    }

    #[test]
    fn alpha_beta_reconstructs_injection(d in system(), dp in -1.0..1.0f64, t in 0.0..200.0f64, h in 0.0..10.0f64, dd in 0.0..10.0f64) {
        let (a, b) = alpha_beta(&d, dp, t);
        let scale = (a * h).abs() + (b * dd).abs();
        prop_assume!(scale > 0.0);
        prop_assert!((a * h + b * dd - step_injection(&d, h, dd, dp, t)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn shares_add_up(d in system(), f in forecast(3), picks in prop::collection::vec(0usize..3, 3), w in prop::collection::vec((0.01..1.0f64, 0.01..1.0f64), 2..5)) {
        let s = scenario(&f, &picks);
        let whole = sequential_injection(&s, &f, &d, 1.0, 1.0).unwrap();
        let (sh, sd) = w.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        let parts: Vec<_> = w.iter().map(|x| sequential_injection(&s, &f, &d, x.0 / sh, x.1 / sd).unwrap()).collect();
        let h = f.horizon();
        let scale = (0..=200).map(|k| whole.value(h * k as f64 / 200.0).abs()).fold(1e-12, f64::max);
        for k in 0..=200 {
            let t = h * k as f64 / 200.0;
            let sum: f64 = parts.iter().map(|p| p.value(t)).sum();
            prop_assert!((sum - whole.value(t)).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn lp_solutions_are_feasible_and_kkt(c in prop::collection::vec(-3.0..3.0f64, 3), rows in prop::collection::vec((prop::collection::vec(-2.0..2.0f64, 3), 0.5..4.0f64), 1..5)) {
        let mut lp = LinearProgram::new(c);
        lp.upper = vec![5.0; 3];
        for (a, b) in rows {
            lp.push(a, RowKind::Le, b);
        }
        let sol = solve(&lp, &LpOptions::default()).unwrap();
        prop_assert!(lp.primal_residual(&sol.x) <= 1e-9);
        prop_assert!(sol.kkt.max() <= 1e-8);
    }
}
