//! Scalar nonautonomous dynamical systems as monotone cocycles, and
//! resolution-qualified classification of their trajectories as almost
//! periodic, asymptotically almost periodic, remotely almost periodic,
//! remotely τ-periodic or remotely stationary.
//!
//! * [`expr`]: the expression language for right-hand sides.
//! * [`dynamics`]: fields, integration/iteration, hypothesis checks.
//! * [`classify`]: tail suprema, almost-period scans, class verdicts.
//! * [`catalog`]: worked examples with closed-form oracles and bounds.

// `!(a < b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod classify;
pub mod dynamics;
pub mod expr;
mod report;

pub use report::{PropertyReport, Verdict, Witness};

/// Version string embedded in every output file.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// First 16 hex digits of the SHA-256 of `s`.
pub fn hash_str(s: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(s.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serde adapter storing an [`expr::Expression`] as its printed text.
pub(crate) mod serde_expr {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::expr::{parse, Expression};

    pub fn serialize<S: Serializer>(e: &Expression, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(e)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expression, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}
