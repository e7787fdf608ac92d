use proptest::prelude::*;
use remrec::classify::{
    almost_period_scan, remote_tau_periodic_test, tail_sup, ScanMode, TauRange, Window,
    WindowSchedule,
};
use remrec::dynamics::Trajectory;
use remrec::expr::parse;
use remrec::Verdict;

fn sampled(source: &str, end: f64, step: f64) -> Trajectory {
    Trajectory::from_function(&parse(source).unwrap(), 0.0, end, step).unwrap()
}

fn sequence(values: Vec<f64>) -> Trajectory {
    Trajectory::sequence(0.0, values, "test").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaling_by_power_of_two_scales_sups_exactly(
        exp in -6i32..7,
        negative in any::<bool>(),
        tau_steps in 1usize..200,
        eps in 0.01..1.0f64,
    ) {
        let c = if negative { -(2f64.powi(exp)) } else { 2f64.powi(exp) };
        let traj = sampled("sin(t) + cos(sqrt(2)*t)/2", 1200.0, 0.1);
        let scaled = traj.scaled(c);
        let tau = tau_steps as f64 * 0.1;
        let schedule = WindowSchedule::geometric(100.0, 10.0, 1000.0, 0.1).unwrap();
        let a = remote_tau_periodic_test(&traj, tau, eps, &schedule).unwrap();
        let b = remote_tau_periodic_test(&scaled, tau, eps * c.abs(), &schedule).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.l, b.l);
        for (x, y) in a.sups.iter().zip(&b.sups) {
            prop_assert_eq!((x.sup * c.abs()).to_bits(), y.sup.to_bits());
        }

        let range = TauRange::new(0.0, 20.0, 0.5).unwrap();
        let ga = almost_period_scan(&traj, eps, ScanMode::Global, &range, None).unwrap();
        let gb = almost_period_scan(&scaled, eps * c.abs(), ScanMode::Global, &range, None).unwrap();
        prop_assert_eq!(ga.admitted(), gb.admitted());
    }

    #[test]
    fn tail_sup_grows_with_the_window(
        a in 0.0..500.0f64,
        len in 1.0..300.0f64,
        extra_lo in 0.0..100.0f64,
        extra_hi in 0.0..100.0f64,
        tau in 0.0..50.0f64,
    ) {
        let traj = sampled("sin(ln(1 + t))", 1000.0, 0.25);
        let inner = Window::new(a + extra_lo, a + extra_lo + len);
        let outer = Window::new(a, a + extra_lo + len + extra_hi);
        let delta = traj.step();
        let s_in = tail_sup(&traj, tau, inner, delta).unwrap();
        let s_out = tail_sup(&traj, tau, outer, delta).unwrap();
        prop_assert!(s_in.sup <= s_out.sup, "{} > {}", s_in.sup, s_out.sup);
    }

    #[test]
    fn periodic_sequence_has_zero_sups(
        block in prop::collection::vec(-100.0..100.0f64, 1..12),
        multiple in 1usize..4,
    ) {
        let p = block.len();
        let values: Vec<f64> = block.iter().copied().cycle().take(2000).collect();
        let traj = sequence(values);
        let schedule = WindowSchedule::geometric(100.0, 10.0, 1950.0, 1.0).unwrap();
        let curve = remote_tau_periodic_test(&traj, (p * multiple) as f64, 1e-12, &schedule).unwrap();
        prop_assert!(curve.sups.iter().all(|s| s.sup == 0.0));
        prop_assert_eq!(curve.verdict, Verdict::Pass);
    }

    #[test]
    fn tail_from_preserves_window_sups(
        cut in 0.0..300.0f64,
        offset in 0.0..200.0f64,
        len in 1.0..200.0f64,
        tau in 0.0..40.0f64,
    ) {
        let traj = sampled("sin(t) + sin(ln(1 + t))", 800.0, 0.1);
        let tail = traj.tail_from(cut).unwrap();
        let w = Window::new(tail.t0() + offset, tail.t0() + offset + len);
        let full = tail_sup(&traj, tau, w, 0.1).unwrap();
        let cut_sup = tail_sup(&tail, tau, w, 0.1).unwrap();
        prop_assert!(
            (full.sup - cut_sup.sup).abs() <= full.budget.max(cut_sup.budget) + 1e-12,
            "{} vs {}", full.sup, cut_sup.sup
        );
    }
}
