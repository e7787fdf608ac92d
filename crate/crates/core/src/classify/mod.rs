//! Resolution-qualified recurrence classification of sampled trajectories.
//!
//! Limits and "for every tau" quantifiers are replaced by finite surrogates:
//! window sups on a geometric schedule and a declared probe set. Every
//! verdict is therefore tagged with the `eps` and horizon it was reached at.

mod classification;
mod scan;
mod tail;

pub use classification::{
    classify_trajectory, separation_constancy_test, Class, ClassVerdict, ClassificationReport,
    ClassifyConfig, Resolution, SeparationReport, IMPLICATIONS,
};
pub use scan::{
    almost_period_scan, density, equi_almost_periodicity_probe, AlmostPeriodSet, Cluster, Density,
    EquiReport, ScanMode, TauRange, TauRecord,
};
pub use tail::{
    asymptotic_stationary_test, asymptotic_tau_periodic_test, default_probes,
    remote_stationary_test, remote_tau_periodic_test, tail_sup, write_curves_csv, CauchyReport,
    StationaryReport, TailSupCurve, Window, WindowSchedule, WindowSup, DEFAULT_SEED,
    DEFAULT_WINDOW_RATIO, DEFAULT_WINDOW_START, MIN_MULTIPLES, MONOTONE_FACTOR, NOISE_FLOOR,
};

use crate::dynamics::DynamicsError;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("window {window} shifted by {tau} needs the trajectory to reach t={required}, but it ends at {available}")]
    WindowExceedsSpan {
        window: Window,
        tau: f64,
        required: f64,
        available: f64,
    },
    #[error("invalid window schedule: {0}")]
    InvalidSchedule(String),
    #[error("need at least {needed} samples, the span holds {available}")]
    InsufficientSpan { needed: usize, available: usize },
    #[error("trajectories are not on a common grid: {0}")]
    GridMismatch(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
