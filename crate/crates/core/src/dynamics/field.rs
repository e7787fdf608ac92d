use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::expr::{parse, EvalContext, Expression};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// `u' = f(t, u)`
    Continuous,
    /// `u(t + 1) = f(t, u(t))`
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeDomain {
    HalfLine,
    FullLine,
}

/// Closed state interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDomain {
    pub lower: f64,
    pub upper: f64,
}

impl StateDomain {
    pub const REALS: StateDomain = StateDomain {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const NONNEGATIVE: StateDomain = StateDomain {
        lower: 0.0,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// A time-dependent coefficient such as the carrying capacity `K_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    Constant(f64),
    /// Expression in `t` (or its alias `n`).
    Expr(#[serde(with = "crate::serde_expr")] Expression),
    /// Explicit values, repeated periodically.
    List(Vec<f64>),
}

/// A named coefficient sequence bound into the right-hand side at each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSeq {
    pub name: String,
    pub values: Coefficients,
    /// Accumulated time shift, so a shifted field reads `K(t + offset)`.
    #[serde(default)]
    pub offset: f64,
}

impl CoefficientSeq {
    pub fn new(name: impl Into<String>, values: Coefficients) -> Self {
        CoefficientSeq {
            name: name.into(),
            values,
            offset: 0.0,
        }
    }

    pub fn value_at(&self, t: f64) -> Result<f64, DynamicsError> {
        let t = t + self.offset;
        match &self.values {
            Coefficients::Constant(c) => Ok(*c),
            Coefficients::Expr(e) => e
                .eval(&EvalContext::new(t, 0.0))
                .map_err(|source| DynamicsError::Eval { t, x: 0.0, source }),
            Coefficients::List(list) => {
                if list.is_empty() {
                    return Err(DynamicsError::InvalidArgument(
                        "empty coefficient list".into(),
                    ));
                }
                let n = list.len() as i64;
                let idx = (t.round() as i64).rem_euclid(n) as usize;
                Ok(list[idx])
            }
        }
    }
}

/// Beverton-Holt denominator `K + (mu - 1) x` must stay at or above this.
pub const BH_DENOMINATOR_FLOOR: f64 = 1e-12;

/// Family-specific guards beyond the expression's own domain checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Family {
    BevertonHolt { mu: f64 },
}

/// The right-hand side `f(t, x)` of an ODE or a difference equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    kind: FieldKind,
    /// Source text as written by the user.
    source: String,
    params: Vec<(String, f64)>,
    #[serde(with = "crate::serde_expr")]
    rhs: Expression,
    coefficients: Option<CoefficientSeq>,
    state_domain: StateDomain,
    time_domain: TimeDomain,
    family: Option<Family>,
    shift: f64,
}

pub struct FieldBuilder {
    kind: FieldKind,
    source: String,
    params: Vec<(String, f64)>,
    coefficients: Option<CoefficientSeq>,
    state_domain: StateDomain,
    time_domain: TimeDomain,
    family: Option<Family>,
}

impl FieldBuilder {
    pub fn param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.push((name.into(), value));
        self
    }

    pub fn params<'a>(mut self, params: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        self.params
            .extend(params.into_iter().map(|(n, v)| (n.to_string(), v)));
        self
    }

    pub fn coefficients(mut self, seq: CoefficientSeq) -> Self {
        self.coefficients = Some(seq);
        self
    }

    pub fn state_domain(mut self, domain: StateDomain) -> Self {
        self.state_domain = domain;
        self
    }

    pub fn time_domain(mut self, domain: TimeDomain) -> Self {
        self.time_domain = domain;
        self
    }

    pub fn family(mut self, family: Family) -> Self {
        self.family = Some(family);
        self
    }

    pub fn build(self) -> Result<ScalarField, DynamicsError> {
        let parsed = parse(&self.source).map_err(|source| DynamicsError::Parse {
            text: self.source.clone(),
            source,
        })?;
        let bindings: Vec<(&str, f64)> =
            self.params.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        let rhs = parsed.bind(&bindings);
        let coefficient_name = self.coefficients.as_ref().map(|c| c.name.as_str());
        let unbound: Vec<String> = rhs
            .parameters()
            .into_iter()
            .filter(|p| Some(p.as_str()) != coefficient_name)
            .collect();
        if !unbound.is_empty() {
            return Err(DynamicsError::UnboundParameters(unbound));
        }
        if self.state_domain.lower > self.state_domain.upper || self.state_domain.lower.is_nan() {
            return Err(DynamicsError::InvalidArgument("empty state domain".into()));
        }
        let field = ScalarField {
            kind: self.kind,
            source: self.source,
            params: self.params,
            rhs,
            coefficients: self.coefficients,
            state_domain: self.state_domain,
            time_domain: self.time_domain,
            family: self.family,
            shift: 0.0,
        };
        field.validate()?;
        Ok(field)
    }
}

impl ScalarField {
    pub fn builder(kind: FieldKind, source: impl Into<String>) -> FieldBuilder {
        FieldBuilder {
            kind,
            source: source.into(),
            params: Vec::new(),
            coefficients: None,
            state_domain: StateDomain::REALS,
            time_domain: TimeDomain::HalfLine,
            family: None,
        }
    }

    /// ODE right-hand side with no parameters.
    pub fn ode(source: &str) -> Result<Self, DynamicsError> {
        Self::builder(FieldKind::Continuous, source).build()
    }

    /// Difference-equation map with no parameters.
    pub fn map(source: &str) -> Result<Self, DynamicsError> {
        Self::builder(FieldKind::Discrete, source).build()
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn rhs(&self) -> &Expression {
        &self.rhs
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn coefficients(&self) -> Option<&CoefficientSeq> {
        self.coefficients.as_ref()
    }

    pub fn state_domain(&self) -> StateDomain {
        self.state_domain
    }

    pub fn time_domain(&self) -> TimeDomain {
        self.time_domain
    }

    pub fn family(&self) -> Option<&Family> {
        self.family.as_ref()
    }

    /// Total translation applied so far.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Stable identifier: source text, bindings and shift.
    pub fn id(&self) -> String {
        let mut id = self.source.clone();
        for (n, v) in &self.params {
            id.push_str(&format!(";{n}={v}"));
        }
        if let Some(c) = &self.coefficients {
            let values = match &c.values {
                Coefficients::Constant(v) => v.to_string(),
                Coefficients::Expr(e) => e.to_string(),
                Coefficients::List(l) => format!("{l:?}"),
            };
            id.push_str(&format!(";{}[n]={values}", c.name));
        }
        if self.shift != 0.0 {
            id.push_str(&format!(";shift={}", self.shift));
        }
        id
    }

    /// `f(t, x)` with all domain guards applied.
    pub fn eval(&self, t: f64, x: f64) -> Result<f64, DynamicsError> {
        if self.kind == FieldKind::Discrete && t.fract() != 0.0 {
            return Err(DynamicsError::NonIntegerTime(t));
        }
        if !self.state_domain.contains(x) {
            return Err(DynamicsError::OutsideStateDomain { t, x });
        }
        let coefficient = match &self.coefficients {
            Some(c) => Some((c.name.as_str(), c.value_at(t)?)),
            None => None,
        };
        if let (Some(Family::BevertonHolt { mu }), Some((_, k))) = (&self.family, coefficient) {
            if k + (mu - 1.0) * x < BH_DENOMINATOR_FLOOR {
                return Err(DynamicsError::OutsideStateDomain { t, x });
            }
        }
        let bound: &[(&str, f64)] = match &coefficient {
            Some(pair) => std::slice::from_ref(pair),
            None => &[],
        };
        self.rhs
            .eval(&EvalContext::new(t, x).with_params(bound))
            .map_err(|source| DynamicsError::Eval { t, x, source })
    }

    /// The translate `f^h(t, x) = f(t + h, x)`.
    pub fn shifted(&self, h: f64) -> Result<ScalarField, DynamicsError> {
        if !h.is_finite() {
            return Err(DynamicsError::InvalidArgument(format!(
                "shift {h} is not finite"
            )));
        }
        if self.time_domain == TimeDomain::HalfLine && h < 0.0 {
            return Err(DynamicsError::InvalidArgument(format!(
                "negative shift {h} on a half-line field"
            )));
        }
        if self.kind == FieldKind::Discrete && h.fract() != 0.0 {
            return Err(DynamicsError::NonIntegerTime(h));
        }
        let mut out = self.clone();
        out.rhs = self.rhs.shift_time(h);
        if let Some(c) = &mut out.coefficients {
            c.offset += h;
        }
        out.shift += h;
        Ok(out)
    }

    /// Spot-checks that the right-hand side evaluates on a small grid of the
    /// time and state domains.
    fn validate(&self) -> Result<(), DynamicsError> {
        let mut times: Vec<f64> = match self.kind {
            FieldKind::Continuous => vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
            FieldKind::Discrete => vec![0.0, 1.0, 2.0, 5.0, 10.0],
        };
        if self.time_domain == TimeDomain::FullLine {
            times.extend([-1.0, -5.0]);
        }
        let d = self.state_domain;
        let mut states: Vec<f64> = [-10.0, -1.0, 0.0, 1.0, 10.0]
            .into_iter()
            .filter(|x| d.contains(*x))
            .collect();
        if states.is_empty() {
            states = [d.lower, d.upper, 0.5 * (d.lower + d.upper)]
                .into_iter()
                .filter(|x| x.is_finite() && d.contains(*x))
                .collect();
        }
        for &t in &times {
            for &x in &states {
                self.eval(t, x).map_err(|e| DynamicsError::Validation {
                    t,
                    x,
                    reason: e.to_string(),
                })?;
            }
        }
        Ok(())
    }
}
