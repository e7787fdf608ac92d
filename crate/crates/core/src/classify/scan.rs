//! Grid scans for epsilon-almost periods and the relative density of the
//! admitted set.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tail::{remote_admission, scan_sup, Window, WindowSchedule};
use super::ClassifyError;
use crate::dynamics::Trajectory;
use crate::report::Verdict;

const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    /// `|phi(t + tau) - phi(t)| <= eps` on the whole available span.
    Global,
    /// The same, but only on every window from some `L` onward.
    Remote,
}

/// The shifts `lo + j * step` for `j = 0, 1, ...` up to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl TauRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self, ClassifyError> {
        if !(step > 0.0 && lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(ClassifyError::InvalidArgument(format!(
                "bad shift range [{lo}, {hi}] step {step}"
            )));
        }
        Ok(TauRange { lo, hi, step })
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + SNAP).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.get(j)).collect()
    }

    fn check_for(&self, traj: &Trajectory) -> Result<(), ClassifyError> {
        if traj.is_discrete() && (self.lo.fract() != 0.0 || self.step.fract() != 0.0) {
            return Err(ClassifyError::InvalidArgument(
                "shift range must use integers on a discrete trajectory".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub tau: f64,
    pub admitted: bool,
    /// Remote mode: start of the first window of the admitting suffix.
    pub l: Option<f64>,
    /// Global sup, or final-window sup in remote mode. A lower bound when the
    /// shift was rejected early.
    pub sup: f64,
}

/// Smallest window length `l` such that every `[a, a + l]` inside the range
/// holds an admitted shift, and the verdict against a declared `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub l: f64,
    pub l_min: Option<f64>,
    pub largest_gap: Option<f64>,
    pub verdict: Verdict,
}

/// `admitted` must be sorted. An empty set is never dense.
pub fn density(admitted: &[f64], range: &TauRange, l: f64) -> Density {
    let (Some(&first), Some(&last)) = (admitted.first(), admitted.last()) else {
        return Density {
            l,
            l_min: None,
            largest_gap: None,
            verdict: Verdict::Fail,
        };
    };
    let largest_gap = admitted.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
    let l_min = largest_gap.max(first - range.lo).max(range.hi - last);
    Density {
        l,
        l_min: Some(l_min),
        largest_gap: (admitted.len() > 1).then_some(largest_gap),
        verdict: Verdict::from_bool(l_min <= l + SNAP * range.step),
    }
}

/// A run of admitted shifts on consecutive grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub lo: f64,
    pub hi: f64,
    /// Admitted shift with the smallest sup.
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriodSet {
    pub eps: f64,
    pub mode: ScanMode,
    pub range: TauRange,
    pub records: Vec<TauRecord>,
    pub density: Density,
}

impl AlmostPeriodSet {
    pub fn admitted(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.admitted)
            .map(|r| r.tau)
            .collect()
    }

    pub fn is_admitted(&self, tau: f64) -> Option<bool> {
        let j = (tau - self.range.lo) / self.range.step;
        let k = j.round();
        if (j - k).abs() > 1e-6 || k < 0.0 {
            return None;
        }
        self.records.get(k as usize).map(|r| r.admitted)
    }

    /// Re-evaluates the density verdict against a different window length.
    pub fn with_density_window(mut self, l: f64) -> Self {
        self.density = density(&self.admitted(), &self.range, l);
        self
    }

    pub fn clusters(&self) -> Vec<Cluster> {
        let mut out: Vec<Cluster> = Vec::new();
        let mut best_sup = f64::INFINITY;
        let mut prev: Option<usize> = None;
        for (j, r) in self.records.iter().enumerate() {
            if !r.admitted {
                continue;
            }
            match (prev, out.last_mut()) {
                (Some(p), Some(c)) if p + 1 == j => {
                    c.hi = r.tau;
                    if r.sup < best_sup {
                        best_sup = r.sup;
                        c.best = r.tau;
                    }
                }
                _ => {
                    out.push(Cluster {
                        lo: r.tau,
                        hi: r.tau,
                        best: r.tau,
                    });
                    best_sup = r.sup;
                }
            }
            prev = Some(j);
        }
        out
    }

    /// CSV with header `tau,admitted,L`; `L` is empty where absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "admitted", "L"])?;
        for r in &self.records {
            w.write_record([
                r.tau.to_string(),
                r.admitted.to_string(),
                r.l.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn global_record(traj: &Trajectory, tau: f64, eps: f64) -> Result<TauRecord, ClassifyError> {
    let end = traj.end() - tau;
    if end < traj.t0() + traj.step() * (1.0 - SNAP) {
        return Err(ClassifyError::InsufficientSpan {
            needed: 2,
            available: 1,
        });
    }
    let (sup, _, exceeded) = scan_sup(traj, tau, Window::new(traj.t0(), end), traj.step(), eps)?;
    Ok(TauRecord {
        tau,
        admitted: !exceeded,
        l: None,
        sup,
    })
}

/// Admits each shift of `range` by the criterion of `mode`, then measures the
/// relative density of the admitted set with the default window length
/// `(hi - lo) / 2`. Remote mode needs a schedule valid for `range.hi`.
pub fn almost_period_scan(
    traj: &Trajectory,
    eps: f64,
    mode: ScanMode,
    range: &TauRange,
    schedule: Option<&WindowSchedule>,
) -> Result<AlmostPeriodSet, ClassifyError> {
    if !(eps > 0.0) {
        return Err(ClassifyError::InvalidArgument(format!(
            "eps {eps} must be > 0"
        )));
    }
    range.check_for(traj)?;
    let schedule = match mode {
        ScanMode::Global => None,
        ScanMode::Remote => {
            let s = schedule.ok_or_else(|| {
                ClassifyError::InvalidArgument("remote scan needs a window schedule".into())
            })?;
            s.check(traj, range.hi)?;
            Some(s)
        }
    };
    let records = range
        .points()
        .into_par_iter()
        .map(|tau| match schedule {
            None => global_record(traj, tau, eps),
            Some(s) => {
                let (l, sup) = remote_admission(traj, tau, eps, s)?;
                Ok(TauRecord {
                    tau,
                    admitted: l.is_some(),
                    l,
                    sup,
                })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let admitted: Vec<f64> = records
        .iter()
        .filter(|r| r.admitted)
        .map(|r| r.tau)
        .collect();
    Ok(AlmostPeriodSet {
        eps,
        mode,
        range: *range,
        density: density(&admitted, range, (range.hi - range.lo) / 2.0),
        records,
    })
}

/// Shifts admitted globally by every trajectory at once: a finite-sample
/// probe of a common almost-period set, not a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquiReport {
    pub eps: f64,
    pub range: TauRange,
    pub admitted_counts: Vec<usize>,
    pub common: Vec<f64>,
    pub density: Density,
    pub label: String,
}

pub fn equi_almost_periodicity_probe(
    trajs: &[Trajectory],
    eps: f64,
    range: &TauRange,
) -> Result<EquiReport, ClassifyError> {
    let [first, rest @ ..] = trajs else {
        return Err(ClassifyError::InvalidArgument("no trajectories".into()));
    };
    if rest.is_empty() {
        return Err(ClassifyError::InvalidArgument(
            "need at least two trajectories".into(),
        ));
    }
    for t in rest {
        if t.is_discrete() != first.is_discrete()
            || (t.step() - first.step()).abs() > SNAP * first.step()
        {
            return Err(ClassifyError::GridMismatch(format!(
                "step {} vs {}",
                t.step(),
                first.step()
            )));
        }
    }
    let sets = trajs
        .iter()
        .map(|t| almost_period_scan(t, eps, ScanMode::Global, range, None))
        .collect::<Result<Vec<_>, _>>()?;
    let common: Vec<f64> = (0..range.len())
        .filter(|&j| sets.iter().all(|s| s.records[j].admitted))
        .map(|j| range.get(j))
        .collect();
    Ok(EquiReport {
        eps,
        range: *range,
        admitted_counts: sets.iter().map(|s| s.admitted().len()).collect(),
        density: density(&common, range, (range.hi - range.lo) / 2.0),
        common,
        label: "heuristic probe, not a certificate".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn function(src: &str, t0: f64, t1: f64, step: f64) -> Trajectory {
        Trajectory::from_function(&parse(src).unwrap(), t0, t1, step).unwrap()
    }

    #[test]
    fn density_edges_and_gaps() {
        let r = TauRange::new(0.0, 10.0, 0.5).unwrap();
        let d = density(&[2.0, 5.0, 6.0], &r, 4.0);
        assert_eq!(d.l_min, Some(4.0));
        assert_eq!(d.largest_gap, Some(3.0));
        assert_eq!(d.verdict, Verdict::Pass);
        assert_eq!(density(&[2.0, 5.0, 6.0], &r, 3.9).verdict, Verdict::Fail);
        assert_eq!(density(&[], &r, 100.0).verdict, Verdict::Fail);
    }

    #[test]
    fn constant_admits_everything() {
        let tr = Trajectory::sequence(0.0, vec![4.0; 200], "c").unwrap();
        let r = TauRange::new(0.0, 50.0, 1.0).unwrap();
        let s = almost_period_scan(&tr, 1e-12, ScanMode::Global, &r, None).unwrap();
        assert_eq!(s.admitted().len(), 51);
        assert_eq!(s.density.largest_gap, Some(1.0));
        assert_eq!(s.clusters().len(), 1);
    }

    #[test]
    fn sine_clusters_near_multiples_of_two_pi() {
        let tr = function("sin(t)", 0.0, 200.0, 0.01);
        let r = TauRange::new(0.0, 20.0, 0.01).unwrap();
        let s = almost_period_scan(&tr, 0.05, ScanMode::Global, &r, None).unwrap();
        let clusters = s.clusters();
        assert_eq!(clusters.len(), 4);
        for (k, c) in clusters.iter().enumerate() {
            let centre = 2.0 * std::f64::consts::PI * k as f64;
            assert!((c.best - centre).abs() <= 0.005, "{c:?}");
        }
        assert_eq!(s.is_admitted(6.29), Some(true));
        assert_eq!(s.is_admitted(3.0), Some(false));
        assert_eq!(s.is_admitted(3.145), None);
    }

    #[test]
    fn remote_scan_contains_global_scan() {
        let tr = function("sin(t) + exp(-t/50)", 0.0, 3000.0, 0.05);
        let r = TauRange::new(0.0, 15.0, 0.05).unwrap();
        let sched = WindowSchedule::for_trajectory(&tr, 15.0).unwrap();
        let g = almost_period_scan(&tr, 0.05, ScanMode::Global, &r, None).unwrap();
        let m = almost_period_scan(&tr, 0.05, ScanMode::Remote, &r, Some(&sched)).unwrap();
        for (a, b) in g.records.iter().zip(&m.records) {
            assert!(!a.admitted || b.admitted, "tau {}", a.tau);
        }
        assert!(m.admitted().len() > g.admitted().len());
        assert!(m.density.verdict.is_pass());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let tr = Trajectory::sequence(0.0, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0], "alt").unwrap();
        let r = TauRange::new(0.0, 2.0, 1.0).unwrap();
        let s = almost_period_scan(&tr, 0.5, ScanMode::Global, &r, None).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "tau,admitted,L\n0,true,\n1,false,\n2,true,\n"
        );
    }

    #[test]
    fn equi_probe_rejects_mixed_grids() {
        let a = function("sin(t)", 0.0, 100.0, 0.01);
        let b = function("sin(t)", 0.0, 100.0, 0.02);
        let r = TauRange::new(0.0, 10.0, 0.02).unwrap();
        assert!(matches!(
            equi_almost_periodicity_probe(&[a, b], 0.1, &r),
            Err(ClassifyError::GridMismatch(_))
        ));
    }
}
