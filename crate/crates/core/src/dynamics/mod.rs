//! Cocycles generated by scalar ODEs `u' = f(t, u)` and difference equations
//! `u(t + 1) = f(t, u(t))`: fields, solvers, sampled trajectories, and
//! empirical checks of the hypotheses the recurrence results rely on.

mod checks;
mod field;
mod integrate;
mod trajectory;

pub use checks::{
    boundedness, check_lipschitz_one, check_monotone_in_x, contraction_gap, gap_report, Direction,
    MONOTONE_SLACK,
};
pub use field::{
    CoefficientSeq, Coefficients, Family, FieldBuilder, FieldKind, ScalarField, StateDomain,
    TimeDomain, BH_DENOMINATOR_FLOOR,
};
pub use integrate::{integrate, iterate, simulate, IntegratorConfig, Method, BLOW_UP_GUARD};
pub use trajectory::{grid_len, Interpolation, Provenance, Trajectory};

use crate::expr::{EvalError, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("cannot parse `{text}`: {source}")]
    Parse { text: String, source: ParseError },
    #[error("unbound parameters: {}", .0.join(", "))]
    UnboundParameters(Vec<String>),
    #[error("field does not evaluate at t={t}, x={x}: {reason}")]
    Validation { t: f64, x: f64, reason: String },
    #[error("at t={t}, x={x}: {source}")]
    Eval { t: f64, x: f64, source: EvalError },
    #[error("x={x} is outside the state domain at t={t}")]
    OutsideStateDomain { t: f64, x: f64 },
    #[error("iterate left the state domain at step {step} (value {value})")]
    LeftStateDomain { step: usize, value: f64 },
    #[error("discrete field evaluated at non-integer time {0}")]
    NonIntegerTime(f64),
    #[error("solution blew up near t={t}; last good time {last_good_t}")]
    BlowUp { t: f64, last_good_t: f64 },
    #[error("step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite value at t={t}")]
    NonFinite { t: f64 },
    #[error("t={t} outside trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("t={0} is not a grid point of a discrete trajectory")]
    NotOnGrid(f64),
    #[error("operation needs a {expected:?} field")]
    WrongKind { expected: FieldKind },
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    InvalidArgument(String),
}

impl DynamicsError {
    /// True for failures of the solver itself rather than bad input.
    pub fn is_integration_abort(&self) -> bool {
        matches!(
            self,
            DynamicsError::BlowUp { .. }
                | DynamicsError::StepUnderflow { .. }
                | DynamicsError::LeftStateDomain { .. }
                | DynamicsError::Eval { .. }
                | DynamicsError::OutsideStateDomain { .. }
                | DynamicsError::NonFinite { .. }
        )
    }
}
