use serde::{Deserialize, Serialize};

use super::field::{FieldKind, ScalarField};
use super::trajectory::{grid_len, Interpolation, Provenance, Trajectory};
use super::DynamicsError;

/// States beyond this magnitude are treated as finite-time blow-up.
pub const BLOW_UP_GUARD: f64 = 1e12;

/// Smallest step relative to `max(1, |t|)` before the adaptive method gives up.
const MIN_RELATIVE_STEP: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4Fixed,
    Rkf45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Largest internal step; for RK4 the step actually used is the largest
    /// divisor of `output_step` not exceeding this.
    pub max_step: f64,
    /// Spacing of the uniform output grid.
    pub output_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rkf45Adaptive,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: 0.01,
            output_step: 0.01,
        }
    }
}

impl IntegratorConfig {
    pub fn rkf45(tol: f64, output_step: f64) -> Self {
        IntegratorConfig {
            method: Method::Rkf45Adaptive,
            abs_tol: tol,
            rel_tol: tol,
            max_step: output_step,
            output_step,
        }
    }

    pub fn rk4(step: f64, output_step: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4Fixed,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: step,
            output_step,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.abs_tol) || !positive(self.rel_tol) {
            return Err(DynamicsError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if !positive(self.max_step) || !positive(self.output_step) {
            return Err(DynamicsError::InvalidConfig(
                "steps must be positive".into(),
            ));
        }
        if self.output_step < 1e-9 {
            return Err(DynamicsError::InvalidConfig(format!(
                "output step {} is below the minimum step 1e-9",
                self.output_step
            )));
        }
        Ok(())
    }

    /// Short stable digest of every setting.
    pub fn hash(&self) -> String {
        crate::hash_str(&format!(
            "method={:?};abs_tol={:e};rel_tol={:e};max_step={:e};output_step={:e}",
            self.method, self.abs_tol, self.rel_tol, self.max_step, self.output_step
        ))
    }
}

/// Integrates `u' = f(t, u)` from `u(t0) = u0` and samples the solution on
/// `t0 + k * output_step` until `t1` is covered.
pub fn integrate(
    field: &ScalarField,
    u0: f64,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    if field.kind() != FieldKind::Continuous {
        return Err(DynamicsError::WrongKind {
            expected: FieldKind::Continuous,
        });
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(DynamicsError::InvalidArgument(format!(
            "empty span [{t0}, {t1}]"
        )));
    }
    if !u0.is_finite() {
        return Err(DynamicsError::InvalidArgument(format!(
            "initial value {u0}"
        )));
    }
    config.validate()?;

    let dt = config.output_step;
    let n = grid_len(t0, t1, dt);
    let mut values = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    let rhs = |t: f64, x: f64| field.eval(t, x);

    let mut x = u0;
    values.push(x);
    slopes.push(rhs(t0, x)?);
    let mut stepper = Stepper::new(config);
    for k in 1..n {
        let t_start = t0 + (k - 1) as f64 * dt;
        let t_end = t0 + k as f64 * dt;
        x = stepper.advance(&rhs, t_start, t_end, x)?;
        values.push(x);
        slopes.push(rhs(t_end, x)?);
    }
    Trajectory::new(
        t0,
        dt,
        values,
        Interpolation::Hermite { slopes },
        Provenance {
            source: field.id(),
            u0,
            config_hash: config.hash(),
        },
    )
}

struct Stepper {
    config: IntegratorConfig,
    h: f64,
}

impl Stepper {
    fn new(config: &IntegratorConfig) -> Self {
        Stepper {
            config: *config,
            h: config.max_step.min(config.output_step),
        }
    }

    fn advance<F>(&mut self, f: &F, t_start: f64, t_end: f64, x: f64) -> Result<f64, DynamicsError>
    where
        F: Fn(f64, f64) -> Result<f64, DynamicsError>,
    {
        match self.config.method {
            Method::Rk4Fixed => {
                let span = t_end - t_start;
                let substeps = (span / self.config.max_step - 1e-9).ceil().max(1.0) as usize;
                let h = span / substeps as f64;
                let mut x = x;
                for i in 0..substeps {
                    let t = t_start + i as f64 * h;
                    x = rk4_step(f, t, x, h)?;
                    guard(t + h, t, x)?;
                }
                Ok(x)
            }
            Method::Rkf45Adaptive => self.advance_adaptive(f, t_start, t_end, x),
        }
    }

    fn advance_adaptive<F>(
        &mut self,
        f: &F,
        t_start: f64,
        t_end: f64,
        x0: f64,
    ) -> Result<f64, DynamicsError>
    where
        F: Fn(f64, f64) -> Result<f64, DynamicsError>,
    {
        let cap = self.config.max_step;
        let (abs_tol, rel_tol) = (self.config.abs_tol, self.config.rel_tol);
        let mut t = t_start;
        let mut x = x0;
        loop {
            let remaining = t_end - t;
            if remaining <= 1e-12 * t_end.abs().max(1.0) {
                return Ok(x);
            }
            let mut h = self.h.min(cap);
            let landing = h >= remaining;
            if landing {
                h = remaining;
            }
            let (x_new, err) = rkf45_step(f, t, x, h)?;
            let scale = abs_tol + rel_tol * x.abs().max(x_new.abs());
            let ratio = err / scale;
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            if ratio <= 1.0 {
                guard(t + h, t, x_new)?;
                t = if landing { t_end } else { t + h };
                x = x_new;
                // A step shortened only to land on the grid says nothing about
                // the step size the error would allow.
                if !landing || factor < 1.0 {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor;
                if self.h < MIN_RELATIVE_STEP * t.abs().max(1.0) {
                    return Err(DynamicsError::StepUnderflow { t });
                }
            }
        }
    }
}

fn guard(t: f64, last_good_t: f64, x: f64) -> Result<(), DynamicsError> {
    if !x.is_finite() || x.abs() > BLOW_UP_GUARD {
        return Err(DynamicsError::BlowUp { t, last_good_t });
    }
    Ok(())
}

fn rk4_step<F>(f: &F, t: f64, x: f64, h: f64) -> Result<f64, DynamicsError>
where
    F: Fn(f64, f64) -> Result<f64, DynamicsError>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, x + 0.5 * h * k1)?;
    let k3 = f(t + 0.5 * h, x + 0.5 * h * k2)?;
    let k4 = f(t + h, x + h * k3)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// One Runge-Kutta-Fehlberg 4(5) step. Returns the fifth-order solution and
/// the magnitude of the embedded error estimate.
fn rkf45_step<F>(f: &F, t: f64, x: f64, h: f64) -> Result<(f64, f64), DynamicsError>
where
    F: Fn(f64, f64) -> Result<f64, DynamicsError>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + h / 4.0, x + h * (k1 / 4.0))?;
    let k3 = f(
        t + 3.0 * h / 8.0,
        x + h * (3.0 / 32.0 * k1 + 9.0 / 32.0 * k2),
    )?;
    let k4 = f(
        t + 12.0 * h / 13.0,
        x + h * (1932.0 / 2197.0 * k1 - 7200.0 / 2197.0 * k2 + 7296.0 / 2197.0 * k3),
    )?;
    let k5 = f(
        t + h,
        x + h * (439.0 / 216.0 * k1 - 8.0 * k2 + 3680.0 / 513.0 * k3 - 845.0 / 4104.0 * k4),
    )?;
    let k6 = f(
        t + h / 2.0,
        x + h
            * (-8.0 / 27.0 * k1 + 2.0 * k2 - 3544.0 / 2565.0 * k3 + 1859.0 / 4104.0 * k4
                - 11.0 / 40.0 * k5),
    )?;
    let x5 = x + h
        * (16.0 / 135.0 * k1 + 6656.0 / 12825.0 * k3 + 28561.0 / 56430.0 * k4 - 9.0 / 50.0 * k5
            + 2.0 / 55.0 * k6);
    let err = h
        * (1.0 / 360.0 * k1 - 128.0 / 4275.0 * k3 - 2197.0 / 75240.0 * k4
            + 1.0 / 50.0 * k5
            + 2.0 / 55.0 * k6);
    Ok((x5, err.abs()))
}

/// Iterates `u(n + 1) = f(n, u(n))` for `steps` steps from `u(0) = u0`.
pub fn iterate(field: &ScalarField, u0: f64, steps: usize) -> Result<Trajectory, DynamicsError> {
    if field.kind() != FieldKind::Discrete {
        return Err(DynamicsError::WrongKind {
            expected: FieldKind::Discrete,
        });
    }
    if steps == 0 {
        return Err(DynamicsError::InvalidArgument(
            "need at least one step".into(),
        ));
    }
    if !field.state_domain().contains(u0) {
        return Err(DynamicsError::LeftStateDomain { step: 0, value: u0 });
    }
    let mut values = Vec::with_capacity(steps + 1);
    values.push(u0);
    let mut x = u0;
    for n in 0..steps {
        x = match field.eval(n as f64, x) {
            Ok(v) => v,
            Err(DynamicsError::OutsideStateDomain { .. }) | Err(DynamicsError::Eval { .. }) => {
                return Err(DynamicsError::LeftStateDomain { step: n, value: x })
            }
            Err(e) => return Err(e),
        };
        if !field.state_domain().contains(x) {
            return Err(DynamicsError::LeftStateDomain {
                step: n + 1,
                value: x,
            });
        }
        guard((n + 1) as f64, n as f64, x)?;
        values.push(x);
    }
    Trajectory::new(
        0.0,
        1.0,
        values,
        Interpolation::None,
        Provenance {
            source: field.id(),
            u0,
            config_hash: crate::hash_str(&format!("iterate;steps={steps}")),
        },
    )
}

/// Runs either kind of field over `[t0, t1]`: integration for ODEs, and
/// iteration of the translate `f^{t0}` for maps (so `t0`, `t1` must be
/// integers there).
pub fn simulate(
    field: &ScalarField,
    u0: f64,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    match field.kind() {
        FieldKind::Continuous => integrate(field, u0, t0, t1, config),
        FieldKind::Discrete => {
            if t0.fract() != 0.0 || t1.fract() != 0.0 || !(t1 > t0) {
                return Err(DynamicsError::InvalidArgument(format!(
                    "discrete span [{t0}, {t1}] must be increasing integers"
                )));
            }
            let shifted = if t0 == 0.0 {
                field.clone()
            } else {
                field.shifted(t0)?
            };
            let tr = iterate(&shifted, u0, (t1 - t0) as usize)?;
            Trajectory::new(
                t0,
                1.0,
                tr.values().to_vec(),
                Interpolation::None,
                Provenance {
                    source: field.id(),
                    u0,
                    config_hash: tr.provenance().config_hash.clone(),
                },
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_decay() {
        let f = ScalarField::ode("-x").unwrap();
        let tr = integrate(&f, 1.0, 0.0, 1.0, &IntegratorConfig::rkf45(1e-10, 0.01)).unwrap();
        assert_eq!(tr.len(), 101);
        let err = (tr.values()[100] - (-1.0_f64).exp()).abs();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn rk4_linear_decay() {
        let f = ScalarField::ode("-x").unwrap();
        let tr = integrate(&f, 1.0, 0.0, 1.0, &IntegratorConfig::rk4(1e-3, 0.01)).unwrap();
        assert!((tr.values()[100] - (-1.0_f64).exp()).abs() <= 1e-12);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = ScalarField::ode("x^2").unwrap();
        match integrate(&f, 1.0, 0.0, 2.0, &IntegratorConfig::default()) {
            Err(DynamicsError::BlowUp { last_good_t: t, .. })
            | Err(DynamicsError::StepUnderflow { t }) => {
                assert!(t < 1.0 && t > 0.99, "{t}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_kind_and_bad_config() {
        let m = ScalarField::map("x").unwrap();
        assert!(matches!(
            integrate(&m, 1.0, 0.0, 1.0, &IntegratorConfig::default()),
            Err(DynamicsError::WrongKind { .. })
        ));
        let f = ScalarField::ode("x").unwrap();
        let bad = IntegratorConfig {
            abs_tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate(&f, 1.0, 0.0, 1.0, &bad),
            Err(DynamicsError::InvalidConfig(_))
        ));
        assert!(integrate(&f, 1.0, 1.0, 1.0, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn identity_map_is_constant() {
        let m = ScalarField::map("x").unwrap();
        let tr = iterate(&m, 3.5, 10).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.values().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn discrete_simulate_uses_translate() {
        let m = ScalarField::map("x + t").unwrap();
        let tr = simulate(&m, 0.0, 3.0, 5.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(tr.values(), &[0.0, 3.0, 7.0]);
        assert_eq!(tr.t0(), 3.0);
    }
}
