//! Turning the system flags into something that produces trajectories.

use clap::Args;
use serde::Serialize;

use remrec::catalog::{
    find, make_beverton_holt, AnalyticExample, BevertonHoltParams, Capacity, ExampleKind,
};
use remrec::dynamics::{
    integrate, simulate, FieldKind, IntegratorConfig, Method, ScalarField, Trajectory,
};
use remrec::expr::{parse, Expression, Var};

use crate::CliError;

#[derive(Args, Debug, Clone, Serialize)]
#[group(id = "system", required = true, multiple = false)]
pub struct SystemArgs {
    /// ODE right-hand side f(t, x)
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub ode: Option<String>,
    /// Difference equation x(n+1) = f(n, x(n)); `n` and `t` are the same variable
    #[arg(long = "map", value_name = "EXPR", allow_hyphen_values = true)]
    pub map: Option<String>,
    /// Closed-form function of t
    #[arg(long = "fn", value_name = "EXPR", allow_hyphen_values = true)]
    pub function: Option<String>,
    /// Catalog entry (see `examples`)
    #[arg(long, value_name = "NAME")]
    pub example: Option<String>,
    /// Beverton-Holt map, e.g. "mu=2,K=10" or "mu=2,K=10 + sin(ln(1 + n)),alpha=9,beta=11"
    #[arg(long, value_name = "SPEC")]
    pub bh: Option<String>,
}

/// Shared flags for parameter values and integration.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    /// Parameter values, e.g. "a=1,b=0.5"
    #[arg(long, value_name = "NAME=VALUE,...", allow_hyphen_values = true)]
    pub param: Option<String>,
    /// Output grid spacing (continuous systems)
    #[arg(long)]
    pub step: Option<f64>,
    /// Absolute and relative tolerance of the adaptive integrator
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Rkf45)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Rkf45,
    Rk4,
}

#[derive(Debug, Clone)]
pub enum Model {
    Function(Expression),
    Field(ScalarField),
}

#[derive(Debug, Clone)]
pub struct System {
    pub label: String,
    pub model: Model,
    pub example: Option<AnalyticExample>,
    /// `mu beta / (mu - 1)` for Beverton-Holt maps with `mu > 1`.
    pub bound: Option<f64>,
    pub integrator: IntegratorConfig,
}

/// Splits on commas outside parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.into_iter()
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect()
}

fn number(flag: &str, key: &str, v: &str) -> Result<f64, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{flag}: `{key}` must be a number, got `{v}`")))
}

pub fn parse_params(text: Option<&str>) -> Result<Vec<(String, f64)>, CliError> {
    let Some(text) = text else {
        return Ok(Vec::new());
    };
    split_top(text)
        .into_iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--param: expected NAME=VALUE, got `{kv}`"))
            })?;
            Ok((k.trim().to_string(), number("--param", k.trim(), v)?))
        })
        .collect()
}

pub fn parse_bh(text: &str) -> Result<BevertonHoltParams, CliError> {
    let mut mu = None;
    let mut k = None;
    let mut alpha = None;
    let mut beta = None;
    for kv in split_top(text) {
        let (key, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--bh: expected KEY=VALUE, got `{kv}`")))?;
        match key.trim() {
            "mu" => mu = Some(number("--bh", "mu", v)?),
            "K" | "k" => k = Some(v.trim().to_string()),
            "alpha" => alpha = Some(number("--bh", "alpha", v)?),
            "beta" => beta = Some(number("--bh", "beta", v)?),
            other => {
                return Err(CliError::Config(format!(
                    "--bh: unknown key `{other}` (mu, K, alpha, beta)"
                )))
            }
        }
    }
    let mu = mu.ok_or_else(|| CliError::Config("--bh: `mu` is required".into()))?;
    let k = k.ok_or_else(|| CliError::Config("--bh: `K` is required".into()))?;
    if let Ok(c) = k.parse::<f64>() {
        let mut p = BevertonHoltParams::constant(mu, c);
        p.alpha = alpha.unwrap_or(c);
        p.beta = beta.unwrap_or(c);
        return Ok(p);
    }
    let expr = parse(&k).map_err(|e| CliError::Config(format!("--bh: K = `{k}`: {e}")))?;
    // Without explicit bounds, use the range over the same samples the constructor checks.
    let samples: Vec<f64> = (0..=1000).map(f64::from).chain([1e4, 1e5, 1e6]).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in samples {
        let v = expr
            .eval(&remrec::expr::EvalContext::new(n, 0.0))
            .map_err(|e| CliError::Config(format!("--bh: K({n}): {e}")))?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(BevertonHoltParams {
        mu,
        k: Capacity::Expr(k),
        alpha: alpha.unwrap_or(lo),
        beta: beta.unwrap_or(hi),
    })
}

impl System {
    pub fn from_args(
        sys: &SystemArgs,
        model: &ModelArgs,
        default_step: f64,
    ) -> Result<System, CliError> {
        let params = parse_params(model.param.as_deref())?;
        let step = model.step.unwrap_or(default_step);
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Config(format!(
                "--step must be positive, got {step}"
            )));
        }
        let integrator = match model.method {
            MethodArg::Rkf45 => IntegratorConfig::rkf45(model.tol, step),
            MethodArg::Rk4 => IntegratorConfig::rk4(step, step),
        };
        if integrator.method == Method::Rkf45Adaptive && !(model.tol > 0.0) {
            return Err(CliError::Config(format!(
                "--tol must be positive, got {}",
                model.tol
            )));
        }
        let field = |kind: FieldKind, src: &str| -> Result<ScalarField, CliError> {
            Ok(ScalarField::builder(kind, src)
                .params(params.iter().map(|(k, v)| (k.as_str(), *v)))
                .build()?)
        };
        let system = if let Some(src) = &sys.ode {
            System {
                label: format!("ode {src}"),
                model: Model::Field(field(FieldKind::Continuous, src)?),
                example: None,
                bound: None,
                integrator,
            }
        } else if let Some(src) = &sys.map {
            System {
                label: format!("map {src}"),
                model: Model::Field(field(FieldKind::Discrete, src)?),
                example: None,
                bound: None,
                integrator,
            }
        } else if let Some(src) = &sys.function {
            let expr = parse(src).map_err(|e| CliError::Config(format!("--fn `{src}`: {e}")))?;
            if expr.uses(Var::X) {
                return Err(CliError::Config(format!(
                    "--fn `{src}`: a function of t may not use x"
                )));
            }
            let bindings: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            let expr = expr.bind(&bindings);
            let unbound = expr.parameters();
            if !unbound.is_empty() {
                return Err(CliError::Config(format!(
                    "--fn `{src}`: unbound parameters {}",
                    unbound.into_iter().collect::<Vec<_>>().join(", ")
                )));
            }
            System {
                label: format!("fn {src}"),
                model: Model::Function(expr),
                example: None,
                bound: None,
                integrator,
            }
        } else if let Some(name) = &sys.example {
            let ex = find(name).map_err(|e| CliError::Config(format!("--example: {e}")))?;
            let step = model.step.unwrap_or(ex.resolution.step);
            let integrator = match model.method {
                MethodArg::Rkf45 => IntegratorConfig::rkf45(model.tol, step),
                MethodArg::Rk4 => IntegratorConfig::rk4(step, step),
            };
            let (model, bound) = match ex.kind {
                ExampleKind::Function => (
                    Model::Function(parse(ex.definition).expect("catalog expressions parse")),
                    None,
                ),
                ExampleKind::Ode => (Model::Field(ScalarField::ode(ex.definition)?), None),
                ExampleKind::Difference => {
                    let bh = make_beverton_holt(&BevertonHoltParams::default())?;
                    (Model::Field(bh.field), bh.limsup_bound)
                }
            };
            System {
                label: format!("example {}", ex.name),
                model,
                example: Some(ex),
                bound,
                integrator,
            }
        } else if let Some(spec) = &sys.bh {
            let bh = make_beverton_holt(&parse_bh(spec)?)?;
            System {
                label: format!("beverton-holt {spec}"),
                model: Model::Field(bh.field),
                example: None,
                bound: bh.limsup_bound,
                integrator,
            }
        } else {
            return Err(CliError::Config(
                "one of --ode, --map, --fn, --example, --bh is required".into(),
            ));
        };
        Ok(system)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(&self.model, Model::Field(f) if f.kind() == FieldKind::Discrete)
    }

    /// Samples on `[t0, t1]`; maps need integer endpoints.
    pub fn trajectory(&self, u0: f64, t0: f64, t1: f64) -> Result<Trajectory, CliError> {
        Ok(match &self.model {
            Model::Function(expr) => {
                Trajectory::from_function(expr, t0, t1, self.integrator.output_step)?
            }
            Model::Field(f) if f.kind() == FieldKind::Continuous => {
                integrate(f, u0, t0, t1, &self.integrator)?
            }
            Model::Field(f) => simulate(f, u0, t0, t1, &self.integrator)?,
        })
    }
}

/// Comma-separated initial values.
pub fn parse_u0(text: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| number("--u0", "u0", v))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Config("--u0: no values".into()));
    }
    Ok(values)
}

/// `a:b` with `a < b`.
pub fn parse_span(flag: &str, text: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("{flag}: expected START:END, got `{text}`")))?;
    let a = number(flag, "start", a)?;
    let b = number(flag, "end", b)?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(CliError::Config(format!(
            "{flag}: need START < END, got `{text}`"
        )));
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_outside_parentheses() {
        assert_eq!(
            split_top("mu=2, K=max(9, 10 + sin(n)),alpha=9"),
            ["mu=2", "K=max(9, 10 + sin(n))", "alpha=9"]
        );
        assert!(split_top("").is_empty());
    }

    #[test]
    fn beverton_holt_specs() {
        let p = parse_bh("mu=2,K=10").unwrap();
        assert_eq!(p, BevertonHoltParams::constant(2.0, 10.0));
        let p = parse_bh("mu=2,K=10 + sin(ln(1 + n))").unwrap();
        assert!(p.alpha >= 9.0 && p.beta <= 11.0 && p.alpha < p.beta);
        assert!(parse_bh("K=10").is_err());
        assert!(parse_bh("mu=2,K=10,gamma=1").is_err());
        assert!(parse_bh("mu=x,K=10").is_err());
    }

    #[test]
    fn spans_and_initial_values() {
        assert_eq!(parse_span("--span", "0:100").unwrap(), (0.0, 100.0));
        assert_eq!(parse_span("--span", "-5:1e3").unwrap(), (-5.0, 1000.0));
        assert!(parse_span("--span", "5:5").is_err());
        assert!(parse_span("--span", "5").is_err());
        assert_eq!(parse_u0("1, 5,20").unwrap(), [1.0, 5.0, 20.0]);
        assert!(parse_u0("1,,2").is_err());
    }

    #[test]
    fn params() {
        assert_eq!(
            parse_params(Some("a=1, b=-0.5")).unwrap(),
            [("a".into(), 1.0), ("b".into(), -0.5)]
        );
        assert!(parse_params(Some("a")).is_err());
        assert!(parse_params(None).unwrap().is_empty());
    }
}
