//! End-to-end acceptance checks. Runs as a plain binary so every check prints
//! exactly one PASS/FAIL line; the process fails if any check does.

use std::f64::consts::{PI, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remrec::catalog::{
    catalog, find, make_beverton_holt, nonasymptotic_witnesses, BevertonHoltParams,
};
use remrec::classify::{
    almost_period_scan, asymptotic_tau_periodic_test, classify_trajectory, default_probes,
    remote_stationary_test, remote_tau_periodic_test, separation_constancy_test, tail_sup, Class,
    ClassifyConfig, ScanMode, TauRange, Window, WindowSchedule, DEFAULT_SEED,
};
use remrec::dynamics::{gap_report, iterate, simulate, IntegratorConfig, ScalarField, Trajectory};
use remrec::expr::{parse, parse_bytes};
use remrec::Verdict;

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn chirp_trajectory(horizon: f64) -> Result<Trajectory, String> {
    let ex = find("cube-root-chirp").map_err(err)?;
    ex.trajectory(0.0, horizon, 0.1).map_err(err)
}

fn chirp_matches_closed_form() -> Outcome {
    let ex = find("cube-root-chirp").map_err(err)?;
    let field = ex.field().map_err(err)?.ok_or("no field")?;
    let traj =
        simulate(&field, 0.0, 0.0, 200.0, &IntegratorConfig::rkf45(1e-9, 0.1)).map_err(err)?;
    let mut worst = 0.0_f64;
    for (k, v) in traj.values().iter().enumerate() {
        let t = traj.time(k);
        let exact = (t * t + PI.powi(3)).cbrt().sin();
        worst = worst.max((v - exact).abs());
    }
    Ok((worst <= 1e-6, format!("max error {worst:.3e} vs 1e-6")))
}

fn log_sine_tail_within_bound() -> Outcome {
    let ex = find("log-sine").map_err(err)?;
    let traj = ex.trajectory(0.0, 1.1e4, 0.01).map_err(err)?;
    let window = Window::new(1e3, 1e4);
    let mut ok = true;
    let mut parts = Vec::new();
    for tau in [1.0, SQRT_2, 5.0] {
        let sup = tail_sup(&traj, tau, window, 0.01).map_err(err)?.sup;
        // |sin a - sin b| <= |a - b| and the log difference is largest at the left end.
        let bound = ((1e3 + tau + 1.0) / (1e3 + 1.0)).ln() + 1e-6;
        let limit = if tau == 1.0 { bound.min(1.1e-3) } else { bound };
        ok &= sup <= limit;
        parts.push(format!("tau={tau:.4}: {sup:.4e} vs {limit:.4e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn chirp_tail_shrinks() -> Outcome {
    let traj = chirp_trajectory(1e5 + 3.0)?;
    let schedule = WindowSchedule::geometric(1e3, 10.0, 1e5, 0.1).map_err(err)?;
    let curve = remote_tau_periodic_test(&traj, 3.0, 0.12, &schedule).map_err(err)?;
    let sups: Vec<f64> = curve.sups.iter().map(|s| s.sup).collect();
    let sup = sups.iter().copied().fold(0.0, f64::max);
    let non_increasing = sups.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = sups.iter().map(|s| format!("{s:.4}")).collect();
    Ok((
        sup <= 0.12 && non_increasing,
        format!(
            "tau=3 sup {sup:.4} vs 0.12, window sups [{}]",
            shown.join(", ")
        ),
    ))
}

fn chirp_witnesses_block_convergence() -> Outcome {
    let ex = find("cube-root-chirp").map_err(err)?;
    let mut worst = 0.0_f64;
    for k in 1..=5 {
        let (t1, t2) = nonasymptotic_witnesses(k).map_err(err)?;
        worst = worst.max(ex.oracle_value(t1, 0.0).map_err(err)?.abs());
        worst = worst.max((ex.oracle_value(t2, 0.0).map_err(err)? - 1.0).abs());
    }
    let traj = chirp_trajectory(1e5)?;
    let report = asymptotic_tau_periodic_test(&traj, 1.0, 0.3).map_err(err)?;
    Ok((
        worst <= 1e-10 && report.verdict == Verdict::Fail,
        format!(
            "witness error {worst:.2e} vs 1e-10, tau=1 Cauchy test {:?} (spread {:.3})",
            report.verdict, report.spread
        ),
    ))
}

fn linear_decay_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let config = IntegratorConfig::default();
    let mut failures = 0;
    let mut worst_ratio = 0.0_f64;
    for forcing in ["sin(t)", "sin(t) + sin(sqrt(2)*t)", "sin(ln(1 + t))"] {
        let field = ScalarField::ode(&format!("-x + {forcing}")).map_err(err)?;
        for _ in 0..100 {
            let u1: f64 = rng.gen_range(-10.0..=10.0);
            let u2: f64 = rng.gen_range(-10.0..=10.0);
            let a = simulate(&field, u1, 0.0, 20.0, &config).map_err(err)?;
            let b = simulate(&field, u2, 0.0, 20.0, &config).map_err(err)?;
            let (gaps, report) = gap_report(&a, &b).map_err(err)?;
            let expected = (u1 - u2).abs() * (-20.0_f64).exp();
            let ratio = gaps[gaps.len() - 1] / expected;
            worst_ratio = worst_ratio.max(ratio);
            if report.verdict != Verdict::Pass || ratio > 1.0 + 1e-3 {
                failures += 1;
            }
        }
    }
    Ok((
        failures == 0,
        format!("{failures}/300 pairs fail, worst gap(20)/(|u1-u2| e^-20) = {worst_ratio:.6}"),
    ))
}

fn beverton_holt_contracts() -> Outcome {
    let bh = make_beverton_holt(&BevertonHoltParams::default()).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut failures = 0;
    let mut worst = 0.0_f64;
    let mut first: Option<String> = None;
    for _ in 0..100 {
        let v1: f64 = rng.gen_range(1.0..=25.0);
        let v2: f64 = rng.gen_range(1.0..=25.0);
        let a = iterate(&bh.field, v1, 10_000).map_err(err)?;
        let b = iterate(&bh.field, v2, 10_000).map_err(err)?;
        let d0 = (v1 - v2).abs();
        let mut prev = d0;
        let mut bad = false;
        for (n, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
            let g = (x - y).abs();
            worst = worst.max(g / d0);
            if g > d0 || g > prev {
                bad = true;
                first.get_or_insert_with(|| {
                    format!("v=({v1:.3}, {v2:.3}) n={n} gap {g:.6e} > {prev:.6e}")
                });
            }
            prev = g;
        }
        failures += usize::from(bad);
    }
    Ok((
        failures == 0,
        format!(
            "{failures}/100 pairs not exactly contracting, worst gap/initial {worst:.4}{}",
            first.map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    ))
}

fn gaps_settle_to_constants() -> Outcome {
    let bh = make_beverton_holt(&BevertonHoltParams::default()).map_err(err)?;
    let discrete = separation_constancy_test(
        &bh.field,
        3.0,
        12.0,
        (0.0, 1e5),
        Window::new(1e4, 1e5),
        1e-3,
        &IntegratorConfig::default(),
    )
    .map_err(err)?;
    let field = ScalarField::ode("-x + sin(t)").map_err(err)?;
    let continuous = separation_constancy_test(
        &field,
        3.0,
        12.0,
        (0.0, 100.0),
        Window::new(50.0, 100.0),
        1e-8,
        &IntegratorConfig::default(),
    )
    .map_err(err)?;
    let ok = discrete.verdict == Verdict::Pass
        && continuous.verdict == Verdict::Pass
        && continuous.c.abs() <= 1e-8;
    Ok((
        ok,
        format!(
            "map drift {:.2e} vs 1e-3 (C={:.3e}); ODE C={:.2e} drift {:.2e} vs 1e-8",
            discrete.drift, discrete.c, continuous.c, continuous.drift
        ),
    ))
}

fn beverton_holt_bounded_and_remotely_stationary() -> Outcome {
    let bh = make_beverton_holt(&BevertonHoltParams::default()).map_err(err)?;
    let bound = bh.limsup_bound.ok_or("mu <= 1")?;
    let probes = default_probes(DEFAULT_SEED, true);
    let mut ok = true;
    let mut parts = Vec::new();
    for u0 in [1.0, 5.0, 20.0] {
        let traj = iterate(&bh.field, u0, 100_000).map_err(err)?;
        let schedule =
            WindowSchedule::for_trajectory(&traj, probes.iter().copied().fold(0.0, f64::max))
                .map_err(err)?;
        let start = schedule.windows()[0].start as usize;
        let tail = traj.values()[start..].iter().copied().fold(0.0, f64::max);
        let report = remote_stationary_test(&traj, &probes, 0.05, &schedule).map_err(err)?;
        ok &= tail <= bound && report.verdict == Verdict::Pass;
        parts.push(format!(
            "u0={u0}: tail sup {tail:.3} vs {bound}, {:?}",
            report.verdict
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// Sup of `|f(t_k + tau) - f(t_k)|` over the sampling grid, straight from
/// the closed form; stops once `eps` is exceeded.
fn brute_force_sup(f: impl Fn(f64) -> f64, n: usize, step: f64, shift: usize, eps: f64) -> f64 {
    let mut sup = 0.0_f64;
    for k in 0..n - shift {
        sup = sup.max((f((k + shift) as f64 * step) - f(k as f64 * step)).abs());
        if sup > eps {
            break;
        }
    }
    sup
}

fn classifier_sanity() -> Outcome {
    let sine = Trajectory::from_function(&parse("sin(t)").map_err(err)?, 0.0, 5000.0, 0.01)
        .map_err(err)?;
    let config = ClassifyConfig {
        tau_max: 100.0,
        tau_step: Some(0.01),
        ..ClassifyConfig::default()
    };
    let report = classify_trajectory(&sine, 0.05, &config).map_err(err)?;
    let gap = report
        .global
        .as_ref()
        .and_then(|g| g.density.largest_gap)
        .unwrap_or(f64::INFINITY);
    let sine_ap = report.verdict(Class::AlmostPeriodic) == Verdict::Pass && gap <= 6.4;
    let sine_rs = report.verdict(Class::RemotelyStationary) == Verdict::Fail;

    let step = 0.01;
    let horizon = 1500.0;
    let quasi = Trajectory::from_function(
        &parse("sin(t) + sin(sqrt(2)*t)").map_err(err)?,
        0.0,
        horizon,
        step,
    )
    .map_err(err)?;
    let range = TauRange::new(0.0, 500.0, step).map_err(err)?;
    let scan = almost_period_scan(&quasi, 0.1, ScanMode::Global, &range, None).map_err(err)?;
    let f = |t: f64| t.sin() + (SQRT_2 * t).sin();
    let mut oracle = Vec::new();
    let mut disagreements = 0;
    for (j, record) in scan.records.iter().enumerate() {
        let sup = brute_force_sup(f, quasi.len(), step, j, 0.1);
        let admitted = sup <= 0.1;
        if admitted {
            oracle.push(j as f64 * step);
        }
        if admitted != record.admitted && (sup - 0.1).abs() > 1e-12 {
            disagreements += 1;
        }
    }
    let oracle_density = remrec::classify::density(&oracle, &range, scan.density.l);
    let quasi_dense = scan.density.verdict == Verdict::Pass
        && oracle_density.verdict == Verdict::Pass
        && disagreements == 0;

    Ok((
        sine_ap && sine_rs && quasi_dense,
        format!(
            "sin: AP {:?} largest gap {gap:.3} vs 6.4, RS {:?}; quasi-periodic: {} admitted, l_min {:.2} vs l {}, oracle l_min {:.2}, {disagreements} disagreements",
            report.verdict(Class::AlmostPeriodic),
            report.verdict(Class::RemotelyStationary),
            scan.admitted().len(),
            scan.density.l_min.unwrap_or(f64::NAN),
            scan.density.l,
            oracle_density.l_min.unwrap_or(f64::NAN),
        ),
    ))
}

fn forced_decay_is_two_pi_periodic() -> Outcome {
    let ex = find("forced-decay").map_err(err)?;
    let traj = ex.trajectory(0.0, 1e4, 0.01).map_err(err)?;
    let tau = 2.0 * PI;
    let asymptotic = asymptotic_tau_periodic_test(&traj, tau, 1e-4).map_err(err)?;
    let schedule = WindowSchedule::for_trajectory(&traj, tau).map_err(err)?;
    let remote = remote_tau_periodic_test(&traj, tau, 1e-6, &schedule).map_err(err)?;
    Ok((
        asymptotic.verdict == Verdict::Pass && remote.verdict == Verdict::Pass,
        format!(
            "Cauchy spread {:.2e} vs 1e-4 {:?}; final window sup {:.2e} vs 1e-6 {:?}",
            asymptotic.spread,
            asymptotic.verdict,
            remote.final_sup(),
            remote.verdict
        ),
    ))
}

fn catalog_reports_consistent() -> Outcome {
    let mut flagged = Vec::new();
    let mut count = 0;
    for ex in catalog() {
        let traj = ex
            .trajectory(ex.u0, ex.resolution.horizon, ex.resolution.step)
            .map_err(err)?;
        let report =
            classify_trajectory(&traj, ex.resolution.eps, &ex.classify_config()).map_err(err)?;
        count += 1;
        if !report.consistent {
            flagged.push(format!("{}: {}", ex.name, report.violations.join(", ")));
        }
    }
    Ok((
        flagged.is_empty(),
        format!(
            "{} of {count} reports flagged{}",
            flagged.len(),
            if flagged.is_empty() {
                String::new()
            } else {
                format!(": {}", flagged.join("; "))
            }
        ),
    ))
}

const TOKEN_BYTES: &[u8] = b"0123456789.eE+-*/^(), \txtnpiabsqrlogexpminmaxfloor";

fn parser_golden_and_fuzz() -> Outcome {
    let golden = include_str!("golden/expressions.tsv");
    let mut golden_failures = 0;
    let mut cases = 0;
    for line in golden.lines() {
        cases += 1;
        let Some((source, canonical)) = line.split_once('\t') else {
            golden_failures += 1;
            continue;
        };
        let ok = match parse(source) {
            Ok(e) => e.to_string() == canonical && parse(canonical).ok().as_ref() == Some(&e),
            Err(_) => false,
        };
        golden_failures += usize::from(!ok);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut crashes = 0;
    let previous_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..100_000 {
        let len = rng.gen_range(0..48);
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..len).map(|_| rng.gen()).collect()
        } else {
            (0..len)
                .map(|_| TOKEN_BYTES[rng.gen_range(0..TOKEN_BYTES.len())])
                .collect()
        };
        let run = catch_unwind(|| {
            if let Ok(e) = parse_bytes(&bytes) {
                let _ = parse(&e.to_string());
            }
        });
        crashes += usize::from(run.is_err());
    }
    std::panic::set_hook(previous_hook);
    Ok((
        golden_failures == 0 && cases == 100 && crashes == 0,
        format!("{golden_failures}/{cases} golden cases fail, {crashes} crashes in 100000 random inputs"),
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (
            "chirp ODE matches its closed form on [0, 200]",
            chirp_matches_closed_form,
        ),
        (
            "log-sine tail sups within the logarithmic bound",
            log_sine_tail_within_bound,
        ),
        (
            "chirp tail sup for tau=3 below 0.12 and shrinking",
            chirp_tail_shrinks,
        ),
        (
            "chirp witnesses exact and Cauchy test fails",
            chirp_witnesses_block_convergence,
        ),
        (
            "linear decay ODE gaps contract like e^-t",
            linear_decay_contracts,
        ),
        ("Beverton-Holt gaps never grow", beverton_holt_contracts),
        (
            "solution gaps settle to constants",
            gaps_settle_to_constants,
        ),
        (
            "Beverton-Holt orbits bounded and remotely stationary",
            beverton_holt_bounded_and_remotely_stationary,
        ),
        (
            "classifier on sin t and sin t + sin sqrt2 t",
            classifier_sanity,
        ),
        (
            "forced decay ODE asymptotically and remotely 2pi-periodic",
            forced_decay_is_two_pi_periodic,
        ),
        (
            "catalog classifications respect the class hierarchy",
            catalog_reports_consistent,
        ),
        (
            "parser golden round trip and fuzzing",
            parser_golden_and_fuzz,
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {name} ({detail}) [{secs:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
