use std::f64::consts::PI;

use proptest::prelude::*;
use remrec::catalog::{
    find, make_beverton_holt, nonasymptotic_witnesses, BevertonHoltParams, Capacity,
};
use remrec::dynamics::{iterate, simulate, IntegratorConfig};

/// Evaluating the bound and the two samples each cost a few ulps; for tiny
/// `tau` the bound itself is of that order.
const ROUNDING_SLACK: f64 = 1e-14;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_capacity_is_a_fixed_point(mu in 1.01..20.0f64, k in 0.1..1000.0f64) {
        let bh = make_beverton_holt(&BevertonHoltParams::constant(mu, k)).unwrap();
        for n in [0.0, 1.0, 17.0, 1e4] {
            let next = bh.field.eval(n, k).unwrap();
            prop_assert!((next - k).abs() <= 1e-12 * k, "f({n}, {k}) = {next}");
        }
    }

    #[test]
    fn orbits_settle_below_the_limsup_bound(
        mu in 1.05..10.0f64,
        u0 in 0.0..100.0f64,
        amp in 0.0..3.0f64,
    ) {
        let params = BevertonHoltParams {
            mu,
            k: Capacity::Expr(format!("10 + {amp}*sin(ln(1 + n))")),
            alpha: 10.0 - amp,
            beta: 10.0 + amp,
        };
        let bh = make_beverton_holt(&params).unwrap();
        let bound = bh.limsup_bound.unwrap();
        let orbit = iterate(&bh.field, u0, 4000).unwrap();
        let tail_max = orbit.values()[2000..].iter().copied().fold(0.0, f64::max);
        prop_assert!(tail_max <= bound * (1.0 + 1e-6), "{tail_max} > {bound}");
    }

    #[test]
    fn log_sine_bound_holds(t in 0.5..1e5f64, tau in 0.0..1e3f64) {
        let ex = find("log-sine").unwrap();
        let diff = (ex.oracle_value(t + tau, 0.0).unwrap() - ex.oracle_value(t, 0.0).unwrap()).abs();
        let bound = ex.tail_bound(t, tau).unwrap();
        prop_assert!(diff <= bound * (1.0 + 1e-9) + ROUNDING_SLACK, "{diff} > {bound}");
    }

    #[test]
    fn chirp_bound_holds(t in 0.0..1e5f64, tau in 0.0..1e3f64, x0 in -5.0..5.0f64) {
        let ex = find("cube-root-chirp").unwrap();
        let diff = (ex.oracle_value(t + tau, x0).unwrap() - ex.oracle_value(t, x0).unwrap()).abs();
        let bound = ex.tail_bound(t, tau).unwrap();
        prop_assert!(diff <= bound * (1.0 + 1e-9) + ROUNDING_SLACK, "{diff} > {bound}");
    }
}

#[test]
fn chirp_witnesses_hit_both_levels() {
    let ex = find("cube-root-chirp").unwrap();
    for k in 1..=10 {
        let (t1, t2) = nonasymptotic_witnesses(k).unwrap();
        // Independent check of the defining cube roots.
        assert!(((t1 * t1 + PI.powi(3)).cbrt() - k as f64 * PI).abs() < 1e-12);
        assert!(((t2 * t2 + PI.powi(3)).cbrt() - (PI / 2.0 + 2.0 * PI * k as f64)).abs() < 1e-12);
        for x0 in [0.0, 0.75] {
            assert!(
                (ex.oracle_value(t1, x0).unwrap() - x0).abs() <= 1e-10,
                "k={k}"
            );
            assert!(
                (ex.oracle_value(t2, x0).unwrap() - x0 - 1.0).abs() <= 1e-10,
                "k={k}"
            );
        }
    }
    assert!(nonasymptotic_witnesses(0).is_err());
}

#[test]
fn chirp_integration_matches_closed_form() {
    let ex = find("cube-root-chirp").unwrap();
    let field = ex.field().unwrap().unwrap();
    for x0 in [0.0, -1.5, 2.0] {
        let traj = simulate(&field, x0, 0.0, 200.0, &IntegratorConfig::rkf45(1e-9, 0.1)).unwrap();
        let worst = traj
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - ex.oracle_value(traj.time(k), x0).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "x0={x0}: {worst}");
    }
}

#[test]
fn forced_decay_integration_matches_closed_form() {
    let ex = find("forced-decay").unwrap();
    let field = ex.field().unwrap().unwrap();
    let traj = simulate(&field, 1.0, 0.0, 50.0, &IntegratorConfig::default()).unwrap();
    for (k, v) in traj.values().iter().enumerate() {
        assert!((v - ex.oracle_value(traj.time(k), 1.0).unwrap()).abs() <= 1e-8);
    }
}
