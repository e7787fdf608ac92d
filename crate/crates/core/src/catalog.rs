//! Worked examples with closed-form solutions and tail bounds, so every
//! prediction has an independent ground truth.
//!
//! Oracles are expressions in `t` with parameter `x0`; bounds are
//! expressions in `t` with parameter `tau` bounding `|phi(t + tau) - phi(t)|`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classify::{Class, ClassifyConfig};
use crate::dynamics::{
    iterate, simulate, CoefficientSeq, Coefficients, DynamicsError, Family, FieldKind,
    IntegratorConfig, ScalarField, StateDomain, Trajectory,
};
use crate::expr::{parse, EvalContext, EvalError, Expression};
use crate::report::Verdict;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("example `{0}` has no closed-form solution")]
    NoOracle(String),
    #[error("example `{0}` has no tail bound")]
    NoBound(String),
    #[error("no witness for k={0}: the radicand is negative")]
    NegativeRadicand(i64),
    #[error("invalid Beverton-Holt parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleKind {
    /// A closed-form function of `t`.
    Function,
    Ode,
    Difference,
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleKind::Function => "function",
            ExampleKind::Ode => "ode",
            ExampleKind::Difference => "difference",
        })
    }
}

/// Where an expectation is claimed to hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleResolution {
    pub eps: f64,
    pub horizon: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticExample {
    pub name: &'static str,
    pub kind: ExampleKind,
    /// Function text, ODE right-hand side, or map.
    pub definition: &'static str,
    pub oracle: Option<&'static str>,
    pub bound: Option<&'static str>,
    /// Expected classification in words.
    pub expected: &'static str,
    /// Verdicts `classify_trajectory` should reach at `resolution`.
    pub expectations: Vec<(Class, Verdict)>,
    pub resolution: ExampleResolution,
    /// Shift for the tau-periodic classes.
    pub period: Option<f64>,
    pub u0: f64,
    pub notes: &'static str,
}

/// The worked examples.
pub fn catalog() -> Vec<AnalyticExample> {
    vec![
        AnalyticExample {
            name: "log-sine",
            kind: ExampleKind::Function,
            definition: "sin(ln(1 + abs(t)))",
            oracle: Some("sin(ln(1 + abs(t)))"),
            bound: Some("abs(ln((1/abs(t) + abs(1 + tau/abs(t))) / (1 + 1/abs(t))))"),
            expected: "remotely stationary, not almost periodic, not asymptotically stationary",
            expectations: vec![
                (Class::RemotelyStationary, Verdict::Pass),
                (Class::AlmostPeriodic, Verdict::Fail),
                (Class::AsymptoticallyStationary, Verdict::Fail),
            ],
            resolution: ExampleResolution {
                eps: 0.02,
                horizon: 1e5,
                step: 0.1,
            },
            period: None,
            u0: 0.0,
            notes: "hits +-1 at t = exp(pi/2 + k pi) - 1 forever",
        },
        AnalyticExample {
            name: "log-phase-sine",
            kind: ExampleKind::Function,
            definition: "sin(t + ln(1 + abs(t)))",
            oracle: Some("sin(t + ln(1 + abs(t)))"),
            bound: None,
            expected: "remotely 2pi-periodic, not asymptotically almost periodic",
            expectations: vec![
                (Class::AsymptoticallyTauPeriodic, Verdict::Fail),
                (Class::RemotelyTauPeriodic, Verdict::Pass),
                (Class::RemotelyAlmostPeriodic, Verdict::Pass),
            ],
            resolution: ExampleResolution {
                eps: 0.05,
                horizon: 1e4,
                step: 0.01,
            },
            period: Some(2.0 * PI),
            u0: 0.0,
            notes: "phase drift ln(1 + t) keeps phi(2 pi k) from converging",
        },
        AnalyticExample {
            name: "cube-root-chirp",
            kind: ExampleKind::Ode,
            definition: "2*t*cos((t^2 + pi^3)^(1/3)) / (3*(t^2 + pi^3)^(2/3))",
            oracle: Some("x0 + sin((t^2 + pi^3)^(1/3))"),
            bound: Some(
                "abs(tau*(2*t + tau)) / ((pi^3 + (t + tau)^2)^(2/3) + ((pi^3 + (t + tau)^2)*(pi^3 + t^2))^(1/3) + (pi^3 + t^2)^(2/3))",
            ),
            expected: "remotely stationary, not asymptotically stationary",
            expectations: vec![
                (Class::AsymptoticallyStationary, Verdict::Fail),
                (Class::RemotelyTauPeriodic, Verdict::Pass),
            ],
            resolution: ExampleResolution {
                eps: 0.05,
                horizon: 1e5,
                step: 0.1,
            },
            period: Some(1.0),
            u0: 0.0,
            notes: "x-independent field; tail differences decay like tau t^(-1/3), so larger shifts need longer horizons",
        },
        AnalyticExample {
            name: "forced-decay",
            kind: ExampleKind::Ode,
            definition: "-x + sin(t)",
            oracle: Some("(sin(t) - cos(t))/2 + (x0 + 1/2)*exp(-t)"),
            bound: None,
            expected: "asymptotically and remotely 2pi-periodic",
            expectations: vec![
                (Class::AsymptoticallyTauPeriodic, Verdict::Pass),
                (Class::RemotelyTauPeriodic, Verdict::Pass),
                (Class::RemotelyAlmostPeriodic, Verdict::Pass),
            ],
            resolution: ExampleResolution {
                eps: 0.05,
                horizon: 1e4,
                step: 0.01,
            },
            period: Some(2.0 * PI),
            u0: 0.0,
            notes: "dissipative 2pi-periodic ODE; every solution approaches (sin t - cos t)/2",
        },
        AnalyticExample {
            name: "beverton-holt",
            kind: ExampleKind::Difference,
            definition: BEVERTON_HOLT,
            oracle: None,
            bound: Some("mu*beta/(mu - 1)"),
            expected: "bounded by mu beta/(mu - 1) and remotely stationary (mu > 1)",
            expectations: vec![
                (Class::RemotelyStationary, Verdict::Pass),
                (Class::AsymptoticallyStationary, Verdict::Fail),
            ],
            resolution: ExampleResolution {
                eps: 0.05,
                horizon: 1e5,
                step: 1.0,
            },
            period: None,
            u0: 5.0,
            notes: "K = 10 + sin(ln(1 + n)), mu = 2, alpha = 9, beta = 11. The uniform Lipschitz-1 condition mu beta^2/alpha^2 <= 1 fails here (2.99) and forces mu < 1 in general, so the mu > 1 regime is checked empirically",
        },
    ]
}

pub fn find(name: &str) -> Result<AnalyticExample, CatalogError> {
    catalog()
        .into_iter()
        .find(|e| e.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| CatalogError::UnknownExample(name.to_string()))
}

fn eval_text(text: &str, t: f64, params: &[(&str, f64)]) -> Result<f64, CatalogError> {
    let expr: Expression = parse(text).expect("catalog expressions parse");
    Ok(expr.eval(&EvalContext::new(t, 0.0).with_params(params))?)
}

impl AnalyticExample {
    /// Closed-form solution at `t` from `phi(0) = x0`.
    pub fn oracle_value(&self, t: f64, x0: f64) -> Result<f64, CatalogError> {
        let text = self
            .oracle
            .ok_or_else(|| CatalogError::NoOracle(self.name.into()))?;
        eval_text(text, t, &[("x0", x0)])
    }

    /// Upper bound on `|phi(t + tau) - phi(t)|` for `t > 0`.
    pub fn tail_bound(&self, t: f64, tau: f64) -> Result<f64, CatalogError> {
        if tau == 0.0 {
            return Ok(0.0);
        }
        match self.bound {
            Some(text) if self.kind != ExampleKind::Difference => {
                eval_text(text, t, &[("tau", tau)])
            }
            _ => Err(CatalogError::NoBound(self.name.into())),
        }
    }

    /// The right-hand side; `None` for closed-form functions.
    pub fn field(&self) -> Result<Option<ScalarField>, CatalogError> {
        match self.kind {
            ExampleKind::Function => Ok(None),
            ExampleKind::Ode => Ok(Some(ScalarField::ode(self.definition)?)),
            ExampleKind::Difference => Ok(Some(
                make_beverton_holt(&BevertonHoltParams::default())?.field,
            )),
        }
    }

    /// Samples the example on `[0, horizon]`: exact for functions, RKF45 at
    /// tolerance 1e-10 with internal steps capped at `step` for ODEs, and
    /// `horizon` iterations for maps.
    pub fn trajectory(&self, u0: f64, horizon: f64, step: f64) -> Result<Trajectory, CatalogError> {
        match self.kind {
            ExampleKind::Function => Ok(Trajectory::from_function(
                &parse(self.definition).expect("catalog expressions parse"),
                0.0,
                horizon,
                step,
            )?),
            ExampleKind::Ode => {
                let field = ScalarField::ode(self.definition)?;
                Ok(simulate(
                    &field,
                    u0,
                    0.0,
                    horizon,
                    &IntegratorConfig::rkf45(1e-10, step),
                )?)
            }
            ExampleKind::Difference => {
                let bh = make_beverton_holt(&BevertonHoltParams::default())?;
                Ok(iterate(&bh.field, u0, horizon.round() as usize)?)
            }
        }
    }

    /// Classifier settings matching the declared resolution.
    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            period: self.period,
            ..ClassifyConfig::default()
        }
    }
}

/// `(t1, t2)` with `(t1^2 + pi^3)^(1/3) = k pi` and
/// `(t2^2 + pi^3)^(1/3) = pi/2 + 2 k pi`, where the cube-root-chirp solution equals
/// `x0` and `x0 + 1` respectively.
pub fn nonasymptotic_witnesses(k: i64) -> Result<(f64, f64), CatalogError> {
    let kf = k as f64;
    let pi3 = PI.powi(3);
    let r1 = (kf * PI).powi(3) - pi3;
    let r2 = (PI / 2.0 + 2.0 * kf * PI).powi(3) - pi3;
    if k < 1 || r1 < 0.0 || r2 < 0.0 {
        return Err(CatalogError::NegativeRadicand(k));
    }
    Ok((r1.sqrt(), r2.sqrt()))
}

pub const BEVERTON_HOLT: &str = "mu*K*x/(K + (mu - 1)*x)";

/// The carrying capacities `K_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capacity {
    Constant(f64),
    /// Expression in `n`.
    Expr(String),
    /// Repeated periodically.
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BevertonHoltParams {
    pub mu: f64,
    pub k: Capacity,
    /// `alpha <= K_n <= beta` for all `n`.
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BevertonHoltParams {
    fn default() -> Self {
        BevertonHoltParams {
            mu: 2.0,
            k: Capacity::Expr("10 + sin(ln(1 + n))".into()),
            alpha: 9.0,
            beta: 11.0,
        }
    }
}

impl BevertonHoltParams {
    /// Constant capacity `k` with `alpha = beta = k`.
    pub fn constant(mu: f64, k: f64) -> Self {
        BevertonHoltParams {
            mu,
            k: Capacity::Constant(k),
            alpha: k,
            beta: k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BevertonHolt {
    pub params: BevertonHoltParams,
    pub field: ScalarField,
    /// `mu beta^2 / alpha^2 <= 1`.
    pub lipschitz_le_one: bool,
    pub mu_gt_one: bool,
    /// `mu beta^2 / alpha^2`, a Lipschitz constant of every map `f(n, .)`.
    pub lipschitz_bound: f64,
    /// `mu beta / (mu - 1)` when `mu > 1`.
    pub limsup_bound: Option<f64>,
}

/// Expression capacities are checked against `[alpha, beta]` at
/// `n = 0..=1000` and at `n = 10^4, 10^5, 10^6`.
pub fn make_beverton_holt(params: &BevertonHoltParams) -> Result<BevertonHolt, CatalogError> {
    let BevertonHoltParams {
        mu, alpha, beta, ..
    } = *params;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(CatalogError::InvalidParams(format!(
            "mu = {mu} must be positive"
        )));
    }
    if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
        return Err(CatalogError::InvalidParams(format!(
            "need 0 < alpha <= beta, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let values = match &params.k {
        Capacity::Constant(k) => Coefficients::Constant(*k),
        Capacity::Expr(text) => Coefficients::Expr(
            parse(text).map_err(|e| CatalogError::InvalidParams(format!("K = `{text}`: {e}")))?,
        ),
        Capacity::List(list) if list.is_empty() => {
            return Err(CatalogError::InvalidParams("empty K list".into()));
        }
        Capacity::List(list) => Coefficients::List(list.clone()),
    };
    let seq = CoefficientSeq::new("K", values);
    let samples: Vec<f64> = match &params.k {
        Capacity::Constant(_) => vec![0.0],
        Capacity::List(list) => (0..list.len()).map(|n| n as f64).collect(),
        Capacity::Expr(_) => (0..=1000).map(f64::from).chain([1e4, 1e5, 1e6]).collect(),
    };
    for n in samples {
        let k = seq.value_at(n)?;
        if !(alpha..=beta).contains(&k) {
            return Err(CatalogError::InvalidParams(format!(
                "K({n}) = {k} lies outside [{alpha}, {beta}]"
            )));
        }
    }
    let upper = if mu < 1.0 {
        alpha / (1.0 - mu)
    } else {
        f64::INFINITY
    };
    let field = ScalarField::builder(FieldKind::Discrete, BEVERTON_HOLT)
        .param("mu", mu)
        .coefficients(seq)
        .state_domain(StateDomain { lower: 0.0, upper })
        .family(Family::BevertonHolt { mu })
        .build()?;
    let lipschitz_bound = mu * beta * beta / (alpha * alpha);
    Ok(BevertonHolt {
        params: params.clone(),
        field,
        lipschitz_le_one: lipschitz_bound <= 1.0,
        mu_gt_one: mu > 1.0,
        lipschitz_bound,
        limsup_bound: (mu > 1.0).then(|| mu * beta / (mu - 1.0)),
    })
}
