//! Per-class verdicts at one resolution, with hierarchy consistency checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::scan::{almost_period_scan, AlmostPeriodSet, ScanMode, TauRange};
use super::tail::{
    asymptotic_stationary_test, asymptotic_tau_periodic_test, default_probes,
    remote_stationary_test, remote_tau_periodic_test, scan_sup, CauchyReport, StationaryReport,
    TailSupCurve, Window, WindowSchedule, DEFAULT_SEED,
};
use super::ClassifyError;
use crate::dynamics::{simulate, IntegratorConfig, ScalarField, Trajectory};
use crate::report::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    Stationary,
    TauPeriodic,
    AlmostPeriodic,
    AsymptoticallyStationary,
    AsymptoticallyTauPeriodic,
    RemotelyTauPeriodic,
    RemotelyStationary,
    RemotelyAlmostPeriodic,
}

impl Class {
    pub const ALL: [Class; 8] = [
        Class::Stationary,
        Class::TauPeriodic,
        Class::AlmostPeriodic,
        Class::AsymptoticallyStationary,
        Class::AsymptoticallyTauPeriodic,
        Class::RemotelyTauPeriodic,
        Class::RemotelyStationary,
        Class::RemotelyAlmostPeriodic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Class::Stationary => "stationary",
            Class::TauPeriodic => "tau-periodic",
            Class::AlmostPeriodic => "almost-periodic",
            Class::AsymptoticallyStationary => "asymptotically-stationary",
            Class::AsymptoticallyTauPeriodic => "asymptotically-tau-periodic",
            Class::RemotelyTauPeriodic => "remotely-tau-periodic",
            Class::RemotelyStationary => "remotely-stationary",
            Class::RemotelyAlmostPeriodic => "remotely-almost-periodic",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `premise => conclusion` at equal resolution.
pub const IMPLICATIONS: [(Class, Class); 5] = [
    (Class::AlmostPeriodic, Class::RemotelyAlmostPeriodic),
    (Class::AsymptoticallyTauPeriodic, Class::RemotelyTauPeriodic),
    (Class::AsymptoticallyStationary, Class::RemotelyStationary),
    (Class::TauPeriodic, Class::RemotelyTauPeriodic),
    (Class::Stationary, Class::AsymptoticallyStationary),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub tau_max: f64,
    /// Defaults to the trajectory step.
    pub tau_step: Option<f64>,
    /// Defaults to the geometric schedule fitted to the trajectory.
    pub schedule: Option<WindowSchedule>,
    /// Defaults to the seeded probe set.
    pub probes: Option<Vec<f64>>,
    pub seed: u64,
    /// Shift for the tau-periodic classes; otherwise taken from the scans.
    pub period: Option<f64>,
    /// Window length for the density verdicts; defaults to half the range.
    pub density_l: Option<f64>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tau_max: 20.0,
            tau_step: None,
            schedule: None,
            probes: None,
            seed: DEFAULT_SEED,
            period: None,
            density_l: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub eps: f64,
    pub t0: f64,
    pub horizon: f64,
    pub delta: f64,
    pub tau_max: f64,
    pub tau_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVerdict {
    pub class: Class,
    pub verdict: Verdict,
    /// What the verdict rests on.
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub resolution: Resolution,
    /// Shift used by the tau-periodic classes.
    pub tau: f64,
    pub tau_source: String,
    pub seed: u64,
    pub schedule: Option<WindowSchedule>,
    pub verdicts: Vec<ClassVerdict>,
    pub global: Option<AlmostPeriodSet>,
    pub remote: Option<AlmostPeriodSet>,
    pub tau_curve: Option<TailSupCurve>,
    pub stationary: Option<StationaryReport>,
    pub asymptotic: Option<CauchyReport>,
    pub asymptotic_stationary: Option<CauchyReport>,
    /// Broken implications; non-empty means every verdict is inconclusive.
    pub violations: Vec<String>,
    pub consistent: bool,
    /// Sub-tests that errored.
    pub errors: Vec<String>,
}

impl ClassificationReport {
    pub fn verdict(&self, class: Class) -> Verdict {
        self.verdicts
            .iter()
            .find(|v| v.class == class)
            .map_or(Verdict::Inconclusive, |v| v.verdict)
    }

    pub fn all_inconclusive(&self) -> bool {
        self.verdicts
            .iter()
            .all(|v| v.verdict == Verdict::Inconclusive)
    }
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.resolution;
        writeln!(
            f,
            "resolution: eps={} span=[{}, {}] delta={} tau in [0, {}] step {}",
            r.eps, r.t0, r.horizon, r.delta, r.tau_max, r.tau_step
        )?;
        writeln!(f, "tau={} ({})", self.tau, self.tau_source)?;
        writeln!(f, "{:<30} {:<13} basis", "class", "verdict")?;
        for v in &self.verdicts {
            writeln!(
                f,
                "{:<30} {:<13} {}",
                v.class.name(),
                v.verdict.to_string(),
                v.basis
            )?;
        }
        if self.consistent {
            writeln!(f, "hierarchy: consistent")?;
        } else {
            writeln!(f, "hierarchy: VIOLATED")?;
            for v in &self.violations {
                writeln!(f, "  {v}")?;
            }
        }
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        Ok(())
    }
}

struct Builder {
    verdicts: Vec<ClassVerdict>,
    errors: Vec<String>,
}

impl Builder {
    fn push(&mut self, class: Class, verdict: Verdict, basis: String) {
        self.verdicts.push(ClassVerdict {
            class,
            verdict,
            basis,
        });
    }

    /// Records a sub-test, or an inconclusive verdict if it errored.
    fn record<T>(
        &mut self,
        class: Class,
        result: Result<T, ClassifyError>,
        judge: impl FnOnce(&T) -> (Verdict, String),
    ) -> Option<T> {
        match result {
            Ok(value) => {
                let (verdict, basis) = judge(&value);
                self.push(class, verdict, basis);
                Some(value)
            }
            Err(e) => {
                self.errors.push(format!("{class}: {e}"));
                self.push(class, Verdict::Inconclusive, format!("error: {e}"));
                None
            }
        }
    }
}

fn second_cluster_best(set: Option<&AlmostPeriodSet>) -> Option<f64> {
    set.and_then(|s| s.clusters().get(1).map(|c| c.best))
}

/// Runs every class test on `traj` at resolution `eps` and assembles the
/// verdicts. Sub-test errors leave that class inconclusive.
pub fn classify_trajectory(
    traj: &Trajectory,
    eps: f64,
    config: &ClassifyConfig,
) -> Result<ClassificationReport, ClassifyError> {
    if !(eps > 0.0) {
        return Err(ClassifyError::InvalidArgument(format!(
            "eps {eps} must be > 0"
        )));
    }
    let discrete = traj.is_discrete();
    let tau_step = config
        .tau_step
        .unwrap_or(if discrete { 1.0 } else { traj.step() });
    let range = TauRange::new(0.0, config.tau_max, tau_step)?;
    let probes = config
        .probes
        .clone()
        .unwrap_or_else(|| default_probes(config.seed, discrete));
    let fallback = 1.0;
    let reserve = probes
        .iter()
        .copied()
        .chain([config.tau_max, config.period.unwrap_or(0.0), fallback])
        .fold(0.0, f64::max);
    let schedule = match &config.schedule {
        Some(s) => s.clone(),
        None => WindowSchedule::for_trajectory(traj, reserve)?,
    };
    let density_l = config.density_l.unwrap_or(config.tau_max / 2.0);
    let mut b = Builder {
        verdicts: Vec::new(),
        errors: Vec::new(),
    };

    let values = traj.values();
    let spread = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    b.push(
        Class::Stationary,
        Verdict::from_bool(spread <= eps),
        format!("spread {spread:.3e} over the whole span"),
    );

    let global = b.record(
        Class::AlmostPeriodic,
        almost_period_scan(traj, eps, ScanMode::Global, &range, None)
            .map(|s| s.with_density_window(density_l)),
        density_basis,
    );
    let remote = b.record(
        Class::RemotelyAlmostPeriodic,
        almost_period_scan(traj, eps, ScanMode::Remote, &range, Some(&schedule))
            .map(|s| s.with_density_window(density_l)),
        density_basis,
    );

    let (tau, tau_source) = if let Some(p) = config.period {
        (p, "declared".to_string())
    } else if let Some(t) = second_cluster_best(global.as_ref()) {
        (t, "best shift of the second global cluster".to_string())
    } else if let Some(t) = second_cluster_best(remote.as_ref()) {
        (t, "best shift of the second remote cluster".to_string())
    } else {
        (fallback, "fallback".to_string())
    };

    let whole = Window::new(traj.t0(), traj.end() - tau);
    b.record(
        Class::TauPeriodic,
        scan_sup(traj, tau, whole, traj.step(), eps),
        |&(sup, at, exceeded)| {
            if exceeded {
                (
                    Verdict::Fail,
                    format!("|phi(t+tau)-phi(t)| = {sup:.3e} > eps at t={at}"),
                )
            } else {
                (Verdict::Pass, format!("sup {sup:.3e} over the whole span"))
            }
        },
    );
    let tail_from = schedule.last().start;
    let asymptotic_stationary = b.record(
        Class::AsymptoticallyStationary,
        asymptotic_stationary_test(traj, tail_from, eps),
        |r| {
            (
                r.verdict,
                format!("spread {:.3e} for t >= {}", r.spread, r.from),
            )
        },
    );
    let asymptotic = b.record(
        Class::AsymptoticallyTauPeriodic,
        asymptotic_tau_periodic_test(traj, tau, eps),
        |r| {
            (
                r.verdict,
                format!(
                    "spread {:.3e} over the last {} multiples",
                    r.spread, r.samples
                ),
            )
        },
    );
    let tau_curve = b.record(
        Class::RemotelyTauPeriodic,
        remote_tau_periodic_test(traj, tau, eps, &schedule),
        |c| (c.verdict, curve_basis(c)),
    );
    let stationary = b.record(
        Class::RemotelyStationary,
        remote_stationary_test(traj, &probes, eps, &schedule),
        |r| {
            let worst = r.curves.iter().map(|c| c.final_sup()).fold(0.0, f64::max);
            (
                r.verdict,
                format!("{} probes, worst final sup {worst:.3e}", r.probes.len()),
            )
        },
    );

    let mut violations = Vec::new();
    for (premise, conclusion) in IMPLICATIONS {
        let p = b.verdicts.iter().position(|v| v.class == premise);
        let c = b.verdicts.iter().position(|v| v.class == conclusion);
        let (Some(p), Some(c)) = (p, c) else { continue };
        if b.verdicts[p].verdict != Verdict::Pass {
            continue;
        }
        match b.verdicts[c].verdict {
            Verdict::Fail => violations.push(format!("{premise} passes but {conclusion} fails")),
            Verdict::Inconclusive => {
                let v = &mut b.verdicts[c];
                v.verdict = Verdict::Pass;
                v.basis = format!("implied by {premise}; direct test: {}", v.basis);
            }
            Verdict::Pass => {}
        }
    }
    if let (Some(g), Some(m)) = (&global, &remote) {
        for (a, r) in g.records.iter().zip(&m.records) {
            if a.admitted && !r.admitted {
                violations.push(format!(
                    "shift {} admitted globally but not remotely",
                    a.tau
                ));
                break;
            }
        }
    }
    if let (Some(c), Some(m)) = (&tau_curve, &remote) {
        if c.verdict == Verdict::Pass && m.is_admitted(tau) == Some(false) {
            violations.push(format!(
                "remotely {tau}-periodic but {tau} is not remotely admitted"
            ));
        }
    }
    let consistent = violations.is_empty();
    if !consistent {
        for v in &mut b.verdicts {
            if v.verdict != Verdict::Inconclusive {
                v.basis = format!("{} (was {}; hierarchy violated)", v.basis, v.verdict);
                v.verdict = Verdict::Inconclusive;
            }
        }
    }

    Ok(ClassificationReport {
        resolution: Resolution {
            eps,
            t0: traj.t0(),
            horizon: traj.end(),
            delta: schedule.delta(),
            tau_max: config.tau_max,
            tau_step,
        },
        tau,
        tau_source,
        seed: config.seed,
        schedule: Some(schedule),
        verdicts: b.verdicts,
        global,
        remote,
        tau_curve,
        stationary,
        asymptotic,
        asymptotic_stationary,
        violations,
        consistent,
        errors: b.errors,
    })
}

fn density_basis(s: &AlmostPeriodSet) -> (Verdict, String) {
    let d = &s.density;
    let basis = match d.l_min {
        Some(l_min) => format!(
            "{} admitted, l_min {l_min:.3} vs l {:.3}",
            s.admitted().len(),
            d.l
        ),
        None => "no admitted shift".to_string(),
    };
    (d.verdict, basis)
}

fn curve_basis(c: &TailSupCurve) -> String {
    let sups: Vec<String> = c.sups.iter().map(|s| format!("{:.2e}", s.sup)).collect();
    format!("window sups [{}]", sups.join(", "))
}

/// Constant `C` approached by the gap between two solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub u1: f64,
    pub u2: f64,
    pub window: Window,
    /// Mean gap over the window.
    pub c: f64,
    /// `max |g - c|` over the window.
    pub drift: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub verdict: Verdict,
}

/// Solves from `u1` and `u2` over `[t0, t1]` and measures how constant the
/// gap `|phi(t, u1) - phi(t, u2)|` is on the grid points of `tail`.
pub fn separation_constancy_test(
    field: &ScalarField,
    u1: f64,
    u2: f64,
    span: (f64, f64),
    tail: Window,
    tol: f64,
    config: &IntegratorConfig,
) -> Result<SeparationReport, ClassifyError> {
    if u1 == u2 {
        return Err(ClassifyError::InvalidArgument(
            "u1 must differ from u2".into(),
        ));
    }
    if !(tail.start >= span.0 && tail.end <= span.1 && tail.start < tail.end) {
        return Err(ClassifyError::InvalidArgument(format!(
            "tail window {tail} must lie inside [{}, {}]",
            span.0, span.1
        )));
    }
    let a = simulate(field, u1, span.0, span.1, config)?;
    let b = simulate(field, u2, span.0, span.1, config)?;
    let gaps: Vec<f64> = (0..a.len())
        .filter(|&k| {
            let t = a.time(k);
            t >= tail.start - 1e-9 * a.step() && t <= tail.end + 1e-9 * a.step()
        })
        .map(|k| (a.values()[k] - b.values()[k]).abs())
        .collect();
    if gaps.is_empty() {
        return Err(ClassifyError::InvalidArgument(format!(
            "no grid points in {tail}"
        )));
    }
    let c = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let drift = gaps.iter().map(|g| (g - c).abs()).fold(0.0, f64::max);
    Ok(SeparationReport {
        u1,
        u2,
        window: tail,
        c,
        drift,
        tolerance: tol,
        samples: gaps.len(),
        verdict: Verdict::from_bool(drift <= tol),
    })
}
