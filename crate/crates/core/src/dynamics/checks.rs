//! Empirical checks of the structural hypotheses: monotonicity in the state,
//! Lipschitz-1 maps, contraction of the solution gap, boundedness.
//!
//! Grid checks sample rather than prove; every report names its grids.

use serde::{Deserialize, Serialize};

use super::field::{FieldKind, ScalarField};
use super::integrate::{simulate, IntegratorConfig};
use super::trajectory::Trajectory;
use super::DynamicsError;
use crate::report::{PropertyReport, Verdict, Witness};

/// Slack allowed in pointwise order comparisons.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

fn grid_note(name: &str, grid: &[f64]) -> String {
    match (grid.first(), grid.last()) {
        (Some(a), Some(b)) => format!("empirical: {name}-grid {} points in [{a}, {b}]", grid.len()),
        _ => format!("empirical: {name}-grid empty"),
    }
}

fn check_grids(t_grid: &[f64], x_grid: &[f64]) -> Result<(), DynamicsError> {
    if t_grid.is_empty() || x_grid.len() < 2 {
        return Err(DynamicsError::InvalidArgument(
            "need a non-empty t-grid and at least two x-grid points".into(),
        ));
    }
    if x_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(DynamicsError::InvalidArgument(
            "x-grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Checks `f(t, x1) <= f(t, x2)` (or `>=`) for consecutive `x1 < x2` of the
/// grid, at every grid time. The extreme value is the worst signed
/// increment in the requested direction (negative means violated).
pub fn check_monotone_in_x(
    field: &ScalarField,
    t_grid: &[f64],
    x_grid: &[f64],
    direction: Direction,
) -> Result<PropertyReport, DynamicsError> {
    check_grids(t_grid, x_grid)?;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut samples = 0;
    for &t in t_grid {
        let mut prev = field.eval(t, x_grid[0])?;
        for w in x_grid.windows(2) {
            let next = field.eval(t, w[1])?;
            let increment = match direction {
                Direction::NonDecreasing => next - prev,
                Direction::NonIncreasing => prev - next,
            };
            if increment < worst {
                worst = increment;
                witness = Some(Witness {
                    t,
                    a: w[0],
                    b: w[1],
                });
            }
            samples += 1;
            prev = next;
        }
    }
    Ok(PropertyReport {
        property: format!("monotone in x ({direction:?})"),
        verdict: Verdict::from_bool(worst >= -MONOTONE_SLACK),
        witness,
        extreme: worst,
        tolerance: MONOTONE_SLACK,
        samples,
        notes: vec![grid_note("t", t_grid), grid_note("x", x_grid)],
    })
}

/// Checks `|f(t, x1) - f(t, x2)| <= |x1 - x2|` over all pairs of grid states.
/// The extreme value is the empirical Lipschitz constant.
pub fn check_lipschitz_one(
    field: &ScalarField,
    t_grid: &[f64],
    x_grid: &[f64],
) -> Result<PropertyReport, DynamicsError> {
    if field.kind() != FieldKind::Discrete {
        return Err(DynamicsError::WrongKind {
            expected: FieldKind::Discrete,
        });
    }
    check_grids(t_grid, x_grid)?;
    let mut worst = 0.0_f64;
    let mut witness = None;
    let mut samples = 0;
    for &t in t_grid {
        let images = x_grid
            .iter()
            .map(|&x| field.eval(t, x))
            .collect::<Result<Vec<_>, _>>()?;
        for i in 0..x_grid.len() {
            for j in i + 1..x_grid.len() {
                let ratio = (images[j] - images[i]).abs() / (x_grid[j] - x_grid[i]);
                if ratio > worst {
                    worst = ratio;
                    witness = Some(Witness {
                        t,
                        a: x_grid[i],
                        b: x_grid[j],
                    });
                }
                samples += 1;
            }
        }
    }
    let tolerance = 1e-12;
    Ok(PropertyReport {
        property: "Lipschitz constant <= 1".into(),
        verdict: Verdict::from_bool(worst <= 1.0 + tolerance),
        witness,
        extreme: worst,
        tolerance,
        samples,
        notes: vec![grid_note("t", t_grid), grid_note("x", x_grid)],
    })
}

/// Checks a gap series `g_k = |phi(t_k, u1) - phi(t_k, u2)|`: never above the
/// initial gap and non-increasing, both within `1e-9 * (1 + |u1 - u2|)`.
/// The extreme value is the worst ratio `g_k / |u1 - u2|`.
pub fn gap_report(
    a: &Trajectory,
    b: &Trajectory,
) -> Result<(Vec<f64>, PropertyReport), DynamicsError> {
    if a.len() != b.len() || a.t0() != b.t0() || a.step() != b.step() {
        return Err(DynamicsError::InvalidArgument(
            "trajectories are on different grids".into(),
        ));
    }
    let gaps: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .collect();
    let initial = gaps[0];
    if initial == 0.0 {
        return Err(DynamicsError::InvalidArgument(
            "initial values coincide".into(),
        ));
    }
    let tolerance = 1e-9 * (1.0 + initial);
    let mut first_violation = None;
    let mut worst_ratio = 0.0_f64;
    let mut worst_at = 0;
    for (k, &g) in gaps.iter().enumerate() {
        if g / initial > worst_ratio {
            worst_ratio = g / initial;
            worst_at = k;
        }
        let grew = k > 0 && g > gaps[k - 1] + tolerance;
        if first_violation.is_none() && (g > initial + tolerance || grew) {
            first_violation = Some(k);
        }
    }
    let k = first_violation.unwrap_or(worst_at);
    let report = PropertyReport {
        property: "gap non-increasing and bounded by initial gap".into(),
        verdict: Verdict::from_bool(first_violation.is_none()),
        witness: Some(Witness {
            t: a.time(k),
            a: a.values()[k],
            b: b.values()[k],
        }),
        extreme: worst_ratio,
        tolerance,
        samples: gaps.len(),
        notes: Vec::new(),
    };
    Ok((gaps, report))
}

/// Solves from `u1` and `u2` over `[t0, t1]` and checks the gap contracts.
pub fn contraction_gap(
    field: &ScalarField,
    u1: f64,
    u2: f64,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<(Vec<f64>, PropertyReport), DynamicsError> {
    if u1 == u2 {
        return Err(DynamicsError::InvalidArgument(
            "u1 must differ from u2".into(),
        ));
    }
    let a = simulate(field, u1, t0, t1, config)?;
    let b = simulate(field, u2, t0, t1, config)?;
    gap_report(&a, &b)
}

/// `sup |phi| <= bound`. The extreme value is the sup; the witness is the first
/// sample exceeding the bound, or the location of the sup when none does.
pub fn boundedness(traj: &Trajectory, bound: f64) -> PropertyReport {
    let (sup, sup_at) = traj.sup_abs();
    let first = traj.values().iter().position(|v| v.abs() > bound);
    let witness = match first {
        Some(k) => Witness {
            t: traj.time(k),
            a: traj.values()[k],
            b: bound,
        },
        None => Witness {
            t: sup_at,
            a: sup,
            b: bound,
        },
    };
    PropertyReport {
        property: format!("sup |phi| <= {bound}"),
        verdict: Verdict::from_bool(first.is_none()),
        witness: Some(witness),
        extreme: sup,
        tolerance: 0.0,
        samples: traj.len(),
        notes: vec![format!("span [{}, {}]", traj.t0(), traj.end())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate::integrate;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn monotone_directions() {
        let t = linspace(0.0, 10.0, 11);
        let x = linspace(-5.0, 5.0, 21);
        let f = ScalarField::ode("-x + sin(t)").unwrap();
        assert!(check_monotone_in_x(&f, &t, &x, Direction::NonIncreasing)
            .unwrap()
            .verdict
            .is_pass());
        let r = check_monotone_in_x(&f, &t, &x, Direction::NonDecreasing).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.witness.unwrap();
        assert!(f.eval(w.t, w.a).unwrap() > f.eval(w.t, w.b).unwrap());

        let g = ScalarField::ode("2*t*cos((t^2+pi^3)^(1/3))/(3*(t^2+pi^3)^(2/3))").unwrap();
        for d in [Direction::NonDecreasing, Direction::NonIncreasing] {
            assert!(check_monotone_in_x(&g, &t, &x, d)
                .unwrap()
                .verdict
                .is_pass());
        }
    }

    #[test]
    fn lipschitz_linear_maps() {
        let t = linspace(0.0, 5.0, 6);
        let x = linspace(-3.0, 3.0, 13);
        let half = check_lipschitz_one(&ScalarField::map("x/2").unwrap(), &t, &x).unwrap();
        assert!(half.verdict.is_pass());
        assert!((half.extreme - 0.5).abs() < 1e-15);
        let double = check_lipschitz_one(&ScalarField::map("2*x").unwrap(), &t, &x).unwrap();
        assert_eq!(double.verdict, Verdict::Fail);
        assert!((double.extreme - 2.0).abs() < 1e-15);
        assert!(double.witness.is_some());
        assert!(check_lipschitz_one(&ScalarField::ode("x").unwrap(), &t, &x).is_err());
    }

    #[test]
    fn contraction_of_dissipative_ode() {
        let f = ScalarField::ode("-x + sin(t)").unwrap();
        let (gaps, report) =
            contraction_gap(&f, 0.0, 1.0, 0.0, 10.0, &IntegratorConfig::default()).unwrap();
        assert!(report.verdict.is_pass(), "{report}");
        // g(t) = e^{-t}
        assert!(gaps[500] <= 6.8e-3);
        assert!((gaps[500] - (-5.0_f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn expanding_gap_fails_with_witness() {
        let f = ScalarField::ode("x").unwrap();
        let (_, report) =
            contraction_gap(&f, 0.0, 1.0, 0.0, 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.witness.unwrap().t <= 0.011);
    }

    #[test]
    fn boundedness_reports_first_exceedance() {
        let f = ScalarField::ode("x").unwrap();
        let tr = integrate(&f, 1.0, 0.0, 5.0, &IntegratorConfig::default()).unwrap();
        let r = boundedness(&tr, 10.0);
        assert_eq!(r.verdict, Verdict::Fail);
        let t = r.witness.unwrap().t;
        assert!((t - 10.0_f64.ln()).abs() <= 0.01, "{t}");

        let c = Trajectory::sequence(0.0, vec![3.5; 5], "const").unwrap();
        assert!(boundedness(&c, 3.5).verdict.is_pass());
    }
}
