//! Finite-window surrogates for `|phi(t + tau) - phi(t)| -> 0` as `t -> inf`.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::dynamics::{Interpolation, Trajectory};
use crate::report::Verdict;

pub const DEFAULT_WINDOW_START: f64 = 100.0;
pub const DEFAULT_WINDOW_RATIO: f64 = 10.0;
/// Allowed growth factor between consecutive window sups.
pub const MONOTONE_FACTOR: f64 = 1.1;
/// Sup growth below `NOISE_FLOOR * eps` is ignored by the monotonicity check.
pub const NOISE_FLOOR: f64 = 1e-3;
/// Minimum number of shift multiples for the sampled Cauchy test.
pub const MIN_MULTIPLES: usize = 20;
/// Seed of the random shift probe unless the caller supplies one.
pub const DEFAULT_SEED: u64 = 1729;

const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Window { start, end }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Windows `[T_i, T_i']` with strictly increasing starts, scanned on the grid
/// `t0 + j * delta` of the trajectory they are applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSchedule {
    windows: Vec<Window>,
    delta: f64,
}

impl WindowSchedule {
    pub fn new(windows: Vec<Window>, delta: f64) -> Result<Self, ClassifyError> {
        if windows.is_empty() {
            return Err(ClassifyError::InvalidSchedule("no windows".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ClassifyError::InvalidSchedule(format!(
                "evaluation step {delta}"
            )));
        }
        for w in &windows {
            if !(w.start.is_finite() && w.end.is_finite() && w.end - w.start >= delta) {
                return Err(ClassifyError::InvalidSchedule(format!(
                    "window {w} is shorter than the evaluation step {delta}"
                )));
            }
        }
        if windows.windows(2).any(|p| !(p[0].start < p[1].start)) {
            return Err(ClassifyError::InvalidSchedule(
                "window starts must increase".into(),
            ));
        }
        Ok(WindowSchedule { windows, delta })
    }

    /// `[first * ratio^i, first * ratio^(i+1)]`, the last window clipped at
    /// `end`.
    pub fn geometric(first: f64, ratio: f64, end: f64, delta: f64) -> Result<Self, ClassifyError> {
        if !(first > 0.0 && ratio > 1.0) {
            return Err(ClassifyError::InvalidSchedule(format!(
                "geometric schedule needs first > 0 and ratio > 1, got {first}, {ratio}"
            )));
        }
        let mut windows = Vec::new();
        let mut start = first;
        while start < end {
            let stop = (start * ratio).min(end);
            if stop - start >= delta {
                windows.push(Window::new(start, stop));
            }
            start *= ratio;
        }
        if windows.is_empty() {
            return Err(ClassifyError::InvalidSchedule(format!(
                "horizon {end} ends before the first window at {first}"
            )));
        }
        Self::new(windows, delta)
    }

    /// Default geometric schedule fitted to `traj`, leaving room for shifts up
    /// to `tau_max` and clipped to start no earlier than the trajectory.
    pub fn for_trajectory(traj: &Trajectory, tau_max: f64) -> Result<Self, ClassifyError> {
        let delta = traj.step();
        let end = traj.end() - tau_max;
        let geo = Self::geometric(DEFAULT_WINDOW_START, DEFAULT_WINDOW_RATIO, end, delta)?;
        let windows: Vec<Window> = geo
            .windows
            .into_iter()
            .filter(|w| w.end - traj.t0() >= delta)
            .map(|w| Window::new(w.start.max(traj.t0()), w.end))
            .collect();
        Self::new(windows, delta)
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn last(&self) -> Window {
        self.windows[self.windows.len() - 1]
    }

    /// Errors unless every window, shifted by `tau`, lies inside `traj`.
    pub fn check(&self, traj: &Trajectory, tau: f64) -> Result<(), ClassifyError> {
        for w in &self.windows {
            check_window(traj, tau, *w)?;
        }
        Ok(())
    }
}

/// `sup |phi(t + tau) - phi(t)|` over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSup {
    pub window: Window,
    pub sup: f64,
    /// Where the sup is attained.
    pub at: f64,
    /// Interpolation error that may be hidden in `sup`.
    pub budget: f64,
}

fn check_window(traj: &Trajectory, tau: f64, w: Window) -> Result<(), ClassifyError> {
    let slack = SNAP * traj.step();
    if w.start < traj.t0() - slack {
        return Err(ClassifyError::InvalidSchedule(format!(
            "window {w} starts before the trajectory at {}",
            traj.t0()
        )));
    }
    if w.end + tau > traj.end() + slack {
        return Err(ClassifyError::WindowExceedsSpan {
            window: w,
            tau,
            required: w.end + tau,
            available: traj.end(),
        });
    }
    Ok(())
}

fn check_shift(traj: &Trajectory, tau: f64, delta: f64) -> Result<(), ClassifyError> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(ClassifyError::InvalidArgument(format!(
            "shift {tau} must be finite and >= 0"
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ClassifyError::InvalidArgument(format!(
            "evaluation step {delta} must be > 0"
        )));
    }
    if traj.is_discrete() {
        if tau.fract() != 0.0 {
            return Err(ClassifyError::InvalidArgument(format!(
                "shift {tau} must be an integer on a discrete trajectory"
            )));
        }
        if delta != 1.0 {
            return Err(ClassifyError::InvalidArgument(
                "evaluation step must be 1 on a discrete trajectory".into(),
            ));
        }
    }
    Ok(())
}

/// Scans `|phi(t + tau) - phi(t)|` over the points `t0 + j * delta` inside
/// `w`. Stops as soon as the running sup exceeds `threshold`; the returned
/// flag says whether it did, in which case the sup is only a lower bound.
pub(crate) fn scan_sup(
    traj: &Trajectory,
    tau: f64,
    w: Window,
    delta: f64,
    threshold: f64,
) -> Result<(f64, f64, bool), ClassifyError> {
    check_shift(traj, tau, delta)?;
    check_window(traj, tau, w)?;
    let t0 = traj.t0();
    let j_lo = ((w.start - t0) / delta - SNAP).ceil().max(0.0) as usize;
    let j_hi = ((w.end - t0) / delta + SNAP).floor() as usize;
    if j_lo > j_hi {
        return Err(ClassifyError::InvalidSchedule(format!(
            "window {w} contains no evaluation points"
        )));
    }
    let mut sup = 0.0_f64;
    let mut at = t0 + j_lo as f64 * delta;
    if let (Some(m), Some(s)) = (
        traj.shift_steps(delta).filter(|&m| m > 0),
        traj.shift_steps(tau),
    ) {
        let v = traj.values();
        let k_hi = (j_hi * m).min(v.len() - 1 - s);
        let k_lo = j_lo * m;
        if k_lo > k_hi {
            return Ok((0.0, at, false));
        }
        let base = v[k_lo..=k_hi].iter().step_by(m);
        let shifted = v[k_lo + s..].iter().step_by(m);
        for (i, (a, b)) in base.zip(shifted).enumerate() {
            let d = (b - a).abs();
            if d > sup {
                sup = d;
                at = traj.time(k_lo + i * m);
                if sup > threshold {
                    return Ok((sup, at, true));
                }
            }
        }
        return Ok((sup, at, false));
    }
    for j in j_lo..=j_hi {
        let t = t0 + j as f64 * delta;
        let d = (traj.value_at(t + tau)? - traj.value_at(t)?).abs();
        if d > sup {
            sup = d;
            at = t;
            if sup > threshold {
                return Ok((sup, at, true));
            }
        }
    }
    Ok((sup, at, false))
}

/// Interpolation error that off-grid evaluations at shift `tau` may carry.
fn budget(traj: &Trajectory, tau: f64, delta: f64) -> f64 {
    match traj.interpolation() {
        Interpolation::Hermite { .. } => {
            let on_grid =
                traj.shift_steps(tau).is_some() && traj.shift_steps(delta).is_some_and(|m| m > 0);
            if on_grid {
                0.0
            } else {
                2.0 * traj.interpolation_error_budget()
            }
        }
        _ => 0.0,
    }
}

/// `max |phi(t + tau) - phi(t)|` over the points `t0 + j * delta` in `window`.
/// Points of a fixed `delta`-grid are used, so enlarging the window never
/// lowers the result.
pub fn tail_sup(
    traj: &Trajectory,
    tau: f64,
    window: Window,
    delta: f64,
) -> Result<WindowSup, ClassifyError> {
    let (sup, at, _) = scan_sup(traj, tau, window, delta, f64::INFINITY)?;
    Ok(WindowSup {
        window,
        sup,
        at,
        budget: budget(traj, tau, delta),
    })
}

/// Window sups for one shift and the verdict drawn from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSupCurve {
    pub tau: f64,
    pub eps: f64,
    pub sups: Vec<WindowSup>,
    /// Sups non-increasing up to `MONOTONE_FACTOR` and the noise floor.
    pub monotone: bool,
    /// Start of the earliest window from which every sup is at most `eps`.
    pub l: Option<f64>,
    pub verdict: Verdict,
}

impl TailSupCurve {
    pub fn final_sup(&self) -> f64 {
        self.sups[self.sups.len() - 1].sup
    }

    /// CSV with header `tau,window_start,window_end,sup`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        write_curves_csv(std::slice::from_ref(self), out)
    }
}

/// Several curves in one CSV table.
pub fn write_curves_csv<W: Write>(curves: &[TailSupCurve], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tau", "window_start", "window_end", "sup"])?;
    for c in curves {
        for s in &c.sups {
            w.write_record([
                c.tau.to_string(),
                s.window.start.to_string(),
                s.window.end.to_string(),
                s.sup.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn suffix_start(sups: &[f64], windows: &[Window], eps: f64) -> Option<f64> {
    let first_ok = sups.iter().rposition(|&s| s > eps).map_or(0, |i| i + 1);
    windows.get(first_ok).map(|w| w.start)
}

/// Pass iff the final window sup is at most `eps` and the sups never grow by
/// more than `MONOTONE_FACTOR`; inconclusive when only the growth check
/// fails; fail when the final sup exceeds `eps`.
pub fn remote_tau_periodic_test(
    traj: &Trajectory,
    tau: f64,
    eps: f64,
    schedule: &WindowSchedule,
) -> Result<TailSupCurve, ClassifyError> {
    if !(eps > 0.0) {
        return Err(ClassifyError::InvalidArgument(format!(
            "eps {eps} must be > 0"
        )));
    }
    schedule.check(traj, tau)?;
    let sups = schedule
        .windows()
        .iter()
        .map(|&w| tail_sup(traj, tau, w, schedule.delta()))
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<f64> = sups.iter().map(|s| s.sup).collect();
    let floor = NOISE_FLOOR * eps;
    let monotone = values
        .windows(2)
        .all(|p| p[1] <= MONOTONE_FACTOR * p[0] + floor);
    let last = values[values.len() - 1];
    let verdict = if last > eps {
        Verdict::Fail
    } else if monotone {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    Ok(TailSupCurve {
        tau,
        eps,
        l: suffix_start(&values, schedule.windows(), eps),
        sups,
        monotone,
        verdict,
    })
}

/// Remote admission of one shift: the start of the earliest window from which
/// every window sup is at most `eps`, scanning backwards and stopping at the
/// first window that exceeds it. The sup is the final window's.
pub(crate) fn remote_admission(
    traj: &Trajectory,
    tau: f64,
    eps: f64,
    schedule: &WindowSchedule,
) -> Result<(Option<f64>, f64), ClassifyError> {
    let windows = schedule.windows();
    let mut l = None;
    let mut final_sup = 0.0;
    for (i, &w) in windows.iter().enumerate().rev() {
        let (sup, _, exceeded) = scan_sup(traj, tau, w, schedule.delta(), eps)?;
        if i == windows.len() - 1 {
            final_sup = sup;
        }
        if exceeded {
            break;
        }
        l = Some(w.start);
    }
    Ok((l, final_sup))
}

/// `{1, sqrt 2, 5, 17.3, 100 u}` with `u` uniform from `seed`; on discrete
/// trajectories each probe is rounded to a positive integer and duplicates
/// are dropped.
pub fn default_probes(seed: u64, discrete: bool) -> Vec<f64> {
    let u: f64 = ChaCha8Rng::seed_from_u64(seed).gen();
    let raw = [1.0, std::f64::consts::SQRT_2, 5.0, 17.3, 100.0 * u];
    let mut out: Vec<f64> = Vec::new();
    for tau in raw {
        let tau = if discrete { tau.round().max(1.0) } else { tau };
        if !out.contains(&tau) {
            out.push(tau);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub eps: f64,
    /// The finite probe set standing in for "every tau".
    pub probes: Vec<f64>,
    pub curves: Vec<TailSupCurve>,
    pub verdict: Verdict,
}

/// Conjunction of `remote_tau_periodic_test` over `probes`.
pub fn remote_stationary_test(
    traj: &Trajectory,
    probes: &[f64],
    eps: f64,
    schedule: &WindowSchedule,
) -> Result<StationaryReport, ClassifyError> {
    if probes.is_empty() {
        return Err(ClassifyError::InvalidArgument("empty probe set".into()));
    }
    let curves = probes
        .iter()
        .map(|&tau| remote_tau_periodic_test(traj, tau, eps, schedule))
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = curves.iter().fold(Verdict::Pass, |v, c| v.and(c.verdict));
    Ok(StationaryReport {
        eps,
        probes: probes.to_vec(),
        curves,
        verdict,
    })
}

/// Spread of a sampled tail: pass at most `eps`, fail above `2 eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    /// Sampling shift; 0 when every grid point of the tail is used.
    pub tau: f64,
    pub eps: f64,
    /// Samples in the tested tail.
    pub samples: usize,
    /// First tested time.
    pub from: f64,
    /// `max - min` over the tested samples.
    pub spread: f64,
    pub argmin: f64,
    pub argmax: f64,
    pub verdict: Verdict,
}

fn cauchy(
    tau: f64,
    eps: f64,
    points: impl Iterator<Item = Result<(f64, f64), ClassifyError>>,
) -> Result<CauchyReport, ClassifyError> {
    let mut lo = (f64::INFINITY, 0.0);
    let mut hi = (f64::NEG_INFINITY, 0.0);
    let mut samples = 0;
    let mut from = f64::NAN;
    for p in points {
        let (t, v) = p?;
        if samples == 0 {
            from = t;
        }
        samples += 1;
        if v < lo.0 {
            lo = (v, t);
        }
        if v > hi.0 {
            hi = (v, t);
        }
    }
    let spread = hi.0 - lo.0;
    let verdict = if spread <= eps {
        Verdict::Pass
    } else if spread > 2.0 * eps {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(CauchyReport {
        tau,
        eps,
        samples,
        from,
        spread,
        argmin: lo.1,
        argmax: hi.1,
        verdict,
    })
}

/// Cauchy test at scale `eps` of `phi(t0 + k tau)` over the last quarter of
/// the available multiples.
pub fn asymptotic_tau_periodic_test(
    traj: &Trajectory,
    tau: f64,
    eps: f64,
) -> Result<CauchyReport, ClassifyError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ClassifyError::InvalidArgument(format!(
            "shift {tau} must be > 0"
        )));
    }
    if traj.is_discrete() && tau.fract() != 0.0 {
        return Err(ClassifyError::InvalidArgument(format!(
            "shift {tau} must be an integer on a discrete trajectory"
        )));
    }
    let n = ((traj.end() - traj.t0()) / tau + SNAP).floor() as usize + 1;
    if n < MIN_MULTIPLES {
        return Err(ClassifyError::InsufficientSpan {
            needed: MIN_MULTIPLES,
            available: n,
        });
    }
    let t0 = traj.t0();
    let points = (n - n / 4..n).map(|k| {
        let t = (t0 + k as f64 * tau).min(traj.end());
        Ok((t, traj.value_at(t)?))
    });
    cauchy(tau, eps, points)
}

/// Cauchy test at scale `eps` of every grid value with `t >= from`.
pub fn asymptotic_stationary_test(
    traj: &Trajectory,
    from: f64,
    eps: f64,
) -> Result<CauchyReport, ClassifyError> {
    let k0 = ((from - traj.t0()) / traj.step() - SNAP).ceil().max(0.0) as usize;
    if k0 + 1 >= traj.len() {
        return Err(ClassifyError::InsufficientSpan {
            needed: 2,
            available: traj.len().saturating_sub(k0),
        });
    }
    let points = (k0..traj.len()).map(|k| Ok((traj.time(k), traj.values()[k])));
    cauchy(0.0, eps, points)
}
