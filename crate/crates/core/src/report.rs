use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of a resolution-limited check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }

    /// Conjunction: any fail wins, then any inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// The `(t, a, b)` triple at which a property check attained its extreme
/// value. Depending on the check `a`, `b` are two states, two solution
/// values, or a value and its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

/// Result of an empirical hypothesis check. A failing report always carries
/// the witness that reproduces the violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub extreme: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Sampling grids or regime remarks; grid-based checks are empirical.
    pub notes: Vec<String>,
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (extreme {:.6e}, tol {:.1e}, {} samples)",
            self.property, self.verdict, self.extreme, self.tolerance, self.samples
        )?;
        if let Some(w) = self.witness {
            write!(f, " witness t={} a={} b={}", w.t, w.a, w.b)?;
        }
        Ok(())
    }
}
