//! Self-contained end-to-end check suites. Every check is deterministic for a
//! given seed.

use std::f64::consts::PI;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use remrec::catalog::{find, make_beverton_holt, nonasymptotic_witnesses, BevertonHoltParams};
use remrec::classify::{
    asymptotic_tau_periodic_test, default_probes, remote_stationary_test, remote_tau_periodic_test,
    separation_constancy_test, Window, WindowSchedule,
};
use remrec::dynamics::{
    check_monotone_in_x, gap_report, integrate, iterate, simulate, Direction, IntegratorConfig,
    ScalarField, MONOTONE_SLACK,
};
use remrec::Verdict;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Forced linear decay: asymptotically and remotely 2pi-periodic
    Periodic,
    /// Order preservation and settling gaps of monotone systems
    Monotone,
    /// The cube-root chirp: remotely 1-periodic but not asymptotically stationary
    ChirpCounterexample,
    /// Beverton-Holt orbits bounded and remotely stationary
    BevertonHolt,
    /// Solution gaps of dissipative ODEs and of Beverton-Holt never grow
    Contraction,
    /// Every suite
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Periodic => "periodic",
            Suite::Monotone => "monotone",
            Suite::ChirpCounterexample => "chirp-counterexample",
            Suite::BevertonHolt => "beverton-holt",
            Suite::Contraction => "contraction",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub check: String,
    pub pass: bool,
    /// What was measured against which limit.
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{} {}/{}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.check,
            self.detail
        )
    }
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn push(&mut self, check: &str, pass: bool, detail: String) {
        self.checks.push(Check {
            suite: self.suite,
            check: check.to_string(),
            pass,
            detail,
        });
    }
}

pub fn run(suite: Suite, seed: u64) -> Result<Vec<Check>, CliError> {
    let suites = match suite {
        Suite::All => vec![
            Suite::Periodic,
            Suite::Monotone,
            Suite::ChirpCounterexample,
            Suite::BevertonHolt,
            Suite::Contraction,
        ],
        s => vec![s],
    };
    let mut checks = Vec::new();
    for s in suites {
        let mut r = Recorder {
            suite: s.name(),
            checks: Vec::new(),
        };
        match s {
            Suite::Periodic => periodic(&mut r)?,
            Suite::Monotone => monotone(&mut r, seed)?,
            Suite::ChirpCounterexample => chirp(&mut r)?,
            Suite::BevertonHolt => beverton_holt(&mut r)?,
            Suite::Contraction => contraction(&mut r, seed)?,
            Suite::All => unreachable!(),
        }
        checks.extend(r.checks);
    }
    Ok(checks)
}

fn periodic(r: &mut Recorder) -> Result<(), CliError> {
    let field = ScalarField::ode("-x + sin(t)")?;
    let traj = integrate(&field, 0.0, 0.0, 1e4, &IntegratorConfig::default())?;
    let tau = 2.0 * PI;
    let cauchy = asymptotic_tau_periodic_test(&traj, tau, 1e-4)?;
    r.push(
        "asymptotic-2pi",
        cauchy.verdict == Verdict::Pass,
        format!(
            "spread of phi(t0 + 2pi k) over the last {} multiples {:.2e} vs 1e-4",
            cauchy.samples, cauchy.spread
        ),
    );
    let schedule = WindowSchedule::for_trajectory(&traj, tau)?;
    let curve = remote_tau_periodic_test(&traj, tau, 1e-6, &schedule)?;
    r.push(
        "remote-2pi",
        curve.verdict == Verdict::Pass,
        format!("final window sup {:.2e} vs 1e-6", curve.final_sup()),
    );
    let sep = separation_constancy_test(
        &field,
        -3.0,
        4.0,
        (0.0, 100.0),
        Window::new(50.0, 100.0),
        1e-8,
        &IntegratorConfig::default(),
    )?;
    r.push(
        "gap-vanishes",
        sep.c.abs() <= 1e-8 && sep.verdict == Verdict::Pass,
        format!("gap constant {:.2e} vs 1e-8", sep.c),
    );
    Ok(())
}

fn monotone(r: &mut Recorder, seed: u64) -> Result<(), CliError> {
    let bh = make_beverton_holt(&BevertonHoltParams::default())?;
    let t_grid: Vec<f64> = (0..=200).map(f64::from).collect();
    let x_grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.25).collect();
    let report = check_monotone_in_x(&bh.field, &t_grid, &x_grid, Direction::NonDecreasing)?;
    r.push(
        "beverton-holt-increasing-in-x",
        report.verdict == Verdict::Pass,
        format!("worst increment {:.3e} on a 201x201 grid", report.extreme),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = ScalarField::ode("sin(x) + cos(t)")?;
    let config = IntegratorConfig::rkf45(1e-10, 0.05);
    let mut broken = 0;
    for _ in 0..20 {
        let a: f64 = rng.gen_range(-5.0..5.0);
        let b: f64 = rng.gen_range(-5.0..5.0);
        let (lo, hi) = (a.min(b), a.max(b));
        let p = integrate(&field, lo, 0.0, 50.0, &config)?;
        let q = integrate(&field, hi, 0.0, 50.0, &config)?;
        if p.values().iter().zip(q.values()).any(|(x, y)| x > y) {
            broken += 1;
        }
    }
    r.push(
        "ode-order-preserved",
        broken == 0,
        format!("{broken}/20 seeded pairs of sin(x) + cos(t) cross"),
    );

    let mut broken = 0;
    for _ in 0..20 {
        let a: f64 = rng.gen_range(0.0..30.0);
        let b: f64 = rng.gen_range(0.0..30.0);
        let (lo, hi) = (a.min(b), a.max(b));
        let p = iterate(&bh.field, lo, 10_000)?;
        let q = iterate(&bh.field, hi, 10_000)?;
        if p.values()
            .iter()
            .zip(q.values())
            .any(|(x, y)| *x > y + MONOTONE_SLACK * y.abs().max(1.0))
        {
            broken += 1;
        }
    }
    r.push(
        "map-order-preserved",
        broken == 0,
        format!("{broken}/20 seeded Beverton-Holt pairs cross"),
    );

    let sep = separation_constancy_test(
        &bh.field,
        3.0,
        12.0,
        (0.0, 1e5),
        Window::new(1e4, 1e5),
        1e-3,
        &IntegratorConfig::default(),
    )?;
    r.push(
        "map-gap-settles",
        sep.verdict == Verdict::Pass,
        format!(
            "gap from (3, 12) drifts {:.2e} around {:.3e} on [1e4, 1e5] vs 1e-3",
            sep.drift, sep.c
        ),
    );
    Ok(())
}

fn chirp(r: &mut Recorder) -> Result<(), CliError> {
    let ex = find("cube-root-chirp")?;
    let field = ScalarField::ode(ex.definition)?;
    let short = integrate(&field, 0.0, 0.0, 200.0, &IntegratorConfig::rkf45(1e-9, 0.1))?;
    let mut worst = 0.0_f64;
    for (k, v) in short.values().iter().enumerate() {
        worst = worst.max((v - ex.oracle_value(short.time(k), 0.0)?).abs());
    }
    r.push(
        "matches-closed-form",
        worst <= 1e-6,
        format!("max error on [0, 200] {worst:.2e} vs 1e-6"),
    );

    let mut worst = 0.0_f64;
    for k in 1..=5 {
        let (t1, t2) = nonasymptotic_witnesses(k)?;
        worst = worst.max(ex.oracle_value(t1, 0.0)?.abs());
        worst = worst.max((ex.oracle_value(t2, 0.0)? - 1.0).abs());
    }
    r.push(
        "witnesses",
        worst <= 1e-10,
        format!("solution returns to x0 and x0 + 1 for k = 1..5, worst error {worst:.2e} vs 1e-10"),
    );

    let traj = simulate(&field, 0.0, 0.0, 1e5, &IntegratorConfig::rkf45(1e-10, 0.1))?;
    let cauchy = asymptotic_tau_periodic_test(&traj, 1.0, 0.3)?;
    r.push(
        "not-asymptotically-stationary",
        cauchy.verdict == Verdict::Fail,
        format!(
            "spread of phi(t0 + k) {:.3} exceeds 2 eps = 0.6",
            cauchy.spread
        ),
    );
    let schedule = WindowSchedule::for_trajectory(&traj, 1.0)?;
    let curve = remote_tau_periodic_test(&traj, 1.0, 0.05, &schedule)?;
    r.push(
        "remotely-1-periodic",
        curve.verdict == Verdict::Pass,
        format!("final window sup {:.3e} vs 0.05", curve.final_sup()),
    );
    Ok(())
}

fn beverton_holt(r: &mut Recorder) -> Result<(), CliError> {
    let fixed = make_beverton_holt(&BevertonHoltParams::constant(2.0, 10.0))?;
    let orbit = iterate(&fixed.field, 10.0, 100)?;
    let drift = orbit
        .values()
        .iter()
        .map(|v| (v - 10.0).abs())
        .fold(0.0, f64::max);
    r.push(
        "capacity-is-fixed",
        drift <= 1e-12,
        format!("orbit from K = 10 stays within {drift:.1e} of 10"),
    );

    let bh = make_beverton_holt(&BevertonHoltParams::default())?;
    let bound = bh.limsup_bound.expect("mu > 1");
    let probes = default_probes(remrec::classify::DEFAULT_SEED, true);
    let reserve = probes.iter().copied().fold(0.0, f64::max);
    for u0 in [1.0, 5.0, 20.0] {
        let traj = iterate(&bh.field, u0, 100_000)?;
        let schedule = WindowSchedule::for_trajectory(&traj, reserve)?;
        let start = schedule.windows()[0].start as usize;
        let tail = traj.values()[start..].iter().copied().fold(0.0, f64::max);
        let report = remote_stationary_test(&traj, &probes, 0.05, &schedule)?;
        let worst = report
            .curves
            .iter()
            .map(|c| c.final_sup())
            .fold(0.0, f64::max);
        r.push(
            &format!("orbit-from-{u0}"),
            tail <= bound && report.verdict == Verdict::Pass,
            format!(
                "tail sup {tail:.4} vs {bound}; worst final window sup over shifts {:?} {worst:.2e} vs 0.05",
                report.probes
            ),
        );
    }
    Ok(())
}

fn contraction(r: &mut Recorder, seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = IntegratorConfig::default();
    for forcing in ["sin(t)", "sin(t) + sin(sqrt(2)*t)", "sin(ln(1 + t))"] {
        let field = ScalarField::ode(&format!("-x + {forcing}"))?;
        let mut worst = 0.0_f64;
        let mut failures = 0;
        for _ in 0..100 {
            let u1: f64 = rng.gen_range(-10.0..=10.0);
            let u2: f64 = rng.gen_range(-10.0..=10.0);
            let a = integrate(&field, u1, 0.0, 20.0, &config)?;
            let b = integrate(&field, u2, 0.0, 20.0, &config)?;
            let (gaps, report) = gap_report(&a, &b)?;
            let ratio = gaps[gaps.len() - 1] / ((u1 - u2).abs() * (-20.0_f64).exp());
            worst = worst.max(report.extreme);
            if report.verdict != Verdict::Pass || ratio > 1.0 + 1e-3 {
                failures += 1;
            }
        }
        r.push(
            &format!("ode -x + {forcing}"),
            failures == 0,
            format!("{failures}/100 pairs fail; worst gap ratio {worst:.6} vs 1, gap(20) within 1e-3 of e^-20"),
        );
    }

    let bh = make_beverton_holt(&BevertonHoltParams::default())?;
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for _ in 0..100 {
        let v1: f64 = rng.gen_range(1.0..=25.0);
        let v2: f64 = rng.gen_range(1.0..=25.0);
        let a = iterate(&bh.field, v1, 10_000)?;
        let b = iterate(&bh.field, v2, 10_000)?;
        let d0 = (v1 - v2).abs();
        let mut prev = d0;
        let mut bad = false;
        for (x, y) in a.values().iter().zip(b.values()) {
            let g = (x - y).abs();
            worst = worst.max(g / d0);
            bad |= g > d0 || g > prev;
            prev = g;
        }
        failures += usize::from(bad);
    }
    r.push(
        "beverton-holt",
        failures == 0,
        format!("{failures}/100 pairs in [1, 25] ever widen; worst gap ratio {worst:.4} vs 1"),
    );
    Ok(())
}
