use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::expr::{EvalContext, Expression};

/// Relative tolerance, in grid units, for treating a time as a grid point.
const GRID_SNAP: f64 = 1e-9;

/// How values between grid points are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Interpolation {
    /// Discrete time: only grid points exist.
    None,
    /// Cubic Hermite from the stored slopes `f(t_k, x_k)`.
    Hermite { slopes: Vec<f64> },
    /// Closed-form function of `t`; off-grid values are evaluated exactly.
    Analytic {
        #[serde(with = "crate::serde_expr")]
        expr: Expression,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Field identifier or function text.
    pub source: String,
    pub u0: f64,
    pub config_hash: String,
}

/// A uniformly sampled solution path `phi(t0 + k * step)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    t0: f64,
    step: f64,
    values: Vec<f64>,
    interpolation: Interpolation,
    provenance: Provenance,
}

impl Trajectory {
    pub fn new(
        t0: f64,
        step: f64,
        values: Vec<f64>,
        interpolation: Interpolation,
        provenance: Provenance,
    ) -> Result<Self, DynamicsError> {
        if values.len() < 2 {
            return Err(DynamicsError::InvalidArgument(
                "a trajectory needs at least two samples".into(),
            ));
        }
        if !(step > 0.0 && step.is_finite() && t0.is_finite()) {
            return Err(DynamicsError::InvalidArgument(format!(
                "bad grid t0={t0} step={step}"
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite {
                t: t0 + k as f64 * step,
            });
        }
        if let Interpolation::Hermite { slopes } = &interpolation {
            if slopes.len() != values.len() {
                return Err(DynamicsError::InvalidArgument(
                    "slope count mismatch".into(),
                ));
            }
        }
        Ok(Trajectory {
            t0,
            step,
            values,
            interpolation,
            provenance,
        })
    }

    /// A discrete sequence on the integer grid starting at `t0`.
    pub fn sequence(
        t0: f64,
        values: Vec<f64>,
        source: impl Into<String>,
    ) -> Result<Self, DynamicsError> {
        let u0 = values.first().copied().unwrap_or(f64::NAN);
        Self::new(
            t0,
            1.0,
            values,
            Interpolation::None,
            Provenance {
                source: source.into(),
                u0,
                config_hash: String::new(),
            },
        )
    }

    /// Samples a closed-form function of `t` on `[t0, t1]` with spacing `step`.
    pub fn from_function(
        expr: &Expression,
        t0: f64,
        t1: f64,
        step: f64,
    ) -> Result<Self, DynamicsError> {
        if !(t1 > t0) {
            return Err(DynamicsError::InvalidArgument(format!(
                "empty span [{t0}, {t1}]"
            )));
        }
        let n = grid_len(t0, t1, step);
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            let t = t0 + k as f64 * step;
            let v = expr
                .eval(&EvalContext::new(t, 0.0))
                .map_err(|source| DynamicsError::Eval { t, x: 0.0, source })?;
            values.push(v);
        }
        let u0 = values[0];
        Self::new(
            t0,
            step,
            values,
            Interpolation::Analytic { expr: expr.clone() },
            Provenance {
                source: expr.to_string(),
                u0,
                config_hash: crate::hash_str(&format!("function;t0={t0};t1={t1};step={step}")),
            },
        )
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interpolation(&self) -> &Interpolation {
        &self.interpolation
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.interpolation, Interpolation::None)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Index `k` with `t == t0 + k * step`, if `t` is a grid point.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let u = (t - self.t0) / self.step;
        let k = u.round();
        if (u - k).abs() <= GRID_SNAP && k >= 0.0 && (k as usize) < self.values.len() {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Number of grid steps in a shift `tau`, if `tau` is a whole multiple of
    /// the step.
    pub fn shift_steps(&self, tau: f64) -> Option<usize> {
        let u = tau / self.step;
        let k = u.round();
        ((u - k).abs() <= GRID_SNAP && k >= 0.0).then_some(k as usize)
    }

    /// `phi(t)`. Grid points return the stored value exactly.
    pub fn value_at(&self, t: f64) -> Result<f64, DynamicsError> {
        let end = self.end();
        let span_slack = GRID_SNAP * self.step;
        if !(t >= self.t0 - span_slack && t <= end + span_slack) {
            return Err(DynamicsError::OutOfSpan {
                t,
                start: self.t0,
                end,
            });
        }
        if let Some(k) = self.grid_index(t) {
            return Ok(self.values[k]);
        }
        match &self.interpolation {
            Interpolation::None => Err(DynamicsError::NotOnGrid(t)),
            Interpolation::Analytic { expr } => expr
                .eval(&EvalContext::new(t, 0.0))
                .map_err(|source| DynamicsError::Eval { t, x: 0.0, source }),
            Interpolation::Hermite { slopes } => {
                let u = (t - self.t0) / self.step;
                let k = (u.floor() as usize).min(self.values.len() - 2);
                let s = u - k as f64;
                let h = self.step;
                let (y0, y1) = (self.values[k], self.values[k + 1]);
                let (m0, m1) = (slopes[k], slopes[k + 1]);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                Ok(h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1)
            }
        }
    }

    /// Estimated worst-case error of off-grid values: `step^4 / 384 * max|phi''''|`
    /// with the fourth derivative taken from third differences of the slopes.
    pub fn interpolation_error_budget(&self) -> f64 {
        match &self.interpolation {
            Interpolation::None | Interpolation::Analytic { .. } => 0.0,
            Interpolation::Hermite { slopes } => {
                let worst = slopes
                    .windows(4)
                    .map(|w| (w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0]).abs())
                    .fold(0.0, f64::max);
                self.step * worst / 384.0
            }
        }
    }

    /// The samples with `t >= from`, re-based so the grid is unchanged.
    pub fn tail_from(&self, from: f64) -> Result<Trajectory, DynamicsError> {
        let k = ((from - self.t0) / self.step - GRID_SNAP).ceil().max(0.0) as usize;
        if k + 2 > self.values.len() {
            return Err(DynamicsError::OutOfSpan {
                t: from,
                start: self.t0,
                end: self.end(),
            });
        }
        let interpolation = match &self.interpolation {
            Interpolation::Hermite { slopes } => Interpolation::Hermite {
                slopes: slopes[k..].to_vec(),
            },
            other => other.clone(),
        };
        Ok(Trajectory {
            t0: self.time(k),
            step: self.step,
            values: self.values[k..].to_vec(),
            interpolation,
            provenance: self.provenance.clone(),
        })
    }

    /// `c * phi`.
    pub fn scaled(&self, c: f64) -> Trajectory {
        let interpolation = match &self.interpolation {
            Interpolation::None => Interpolation::None,
            Interpolation::Hermite { slopes } => Interpolation::Hermite {
                slopes: slopes.iter().map(|m| c * m).collect(),
            },
            Interpolation::Analytic { expr } => Interpolation::Analytic {
                expr: expr.scaled(c),
            },
        };
        Trajectory {
            t0: self.t0,
            step: self.step,
            values: self.values.iter().map(|v| c * v).collect(),
            interpolation,
            provenance: self.provenance.clone(),
        }
    }

    pub fn sup_abs(&self) -> (f64, f64) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |acc, (k, v)| {
                if v.abs() > acc.1 {
                    (k, v.abs())
                } else {
                    acc
                }
            });
        (v, self.time(k))
    }

    /// CSV with header `t,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([self.time(k).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of grid points `t0 + k * step` needed to cover `[t0, t1]`.
pub fn grid_len(t0: f64, t1: f64, step: f64) -> usize {
    let n = ((t1 - t0) / step - GRID_SNAP).ceil().max(1.0);
    n as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn hermite_reproduces_cubics_exactly() {
        // phi = t^3 - 2t, phi' = 3t^2 - 2; Hermite is exact for cubics.
        let step = 0.25;
        let ts: Vec<f64> = (0..9).map(|k| k as f64 * step).collect();
        let values = ts.iter().map(|t| t * t * t - 2.0 * t).collect();
        let slopes = ts.iter().map(|t| 3.0 * t * t - 2.0).collect();
        let prov = Provenance {
            source: "cubic".into(),
            u0: 0.0,
            config_hash: String::new(),
        };
        let tr =
            Trajectory::new(0.0, step, values, Interpolation::Hermite { slopes }, prov).unwrap();
        for t in [0.1, 0.33, 1.01, 1.99] {
            let exact = t * t * t - 2.0 * t;
            assert!((tr.value_at(t).unwrap() - exact).abs() < 1e-14);
        }
        assert_eq!(tr.value_at(0.5).unwrap(), tr.values()[2]);
        assert!(tr.value_at(2.1).is_err());
    }

    #[test]
    fn discrete_has_no_off_grid_values() {
        let tr = Trajectory::sequence(0.0, vec![1.0, 2.0, 3.0], "seq").unwrap();
        assert_eq!(tr.value_at(2.0).unwrap(), 3.0);
        assert!(matches!(tr.value_at(0.5), Err(DynamicsError::NotOnGrid(_))));
    }

    #[test]
    fn analytic_off_grid() {
        let e = parse("sin(t)").unwrap();
        let tr = Trajectory::from_function(&e, 0.0, 10.0, 0.1).unwrap();
        assert_eq!(tr.len(), 101);
        assert_eq!(tr.value_at(1.2345).unwrap(), 1.2345_f64.sin());
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(Trajectory::sequence(0.0, vec![1.0], "x").is_err());
        assert!(matches!(
            Trajectory::sequence(0.0, vec![1.0, f64::NAN], "x"),
            Err(DynamicsError::NonFinite { .. })
        ));
    }

    #[test]
    fn tail_keeps_grid() {
        let tr = Trajectory::sequence(0.0, (0..10).map(f64::from).collect(), "n").unwrap();
        let tail = tr.tail_from(4.0).unwrap();
        assert_eq!(tail.t0(), 4.0);
        assert_eq!(tail.values()[0], 4.0);
        assert_eq!(tail.value_at(7.0).unwrap(), 7.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let tr = Trajectory::sequence(0.0, vec![3.5, 3.5], "x").unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,value\n0,3.5\n1,3.5\n");
    }
}
