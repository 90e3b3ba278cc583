//! Reading martingale values as evidence, and turning p-values into Bayes factors.

use std::f64::consts::E;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jeffreys's qualitative scale for the evidence a likelihood ratio (or a
/// martingale value started at 1) provides against the null hypothesis.
///
/// Thresholds are 1, √10, 10, 10^{3/2} and 100. Intervals are left-open, so a
/// value exactly on a threshold belongs to the lower category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceCategory {
    SupportsNull,
    BareMention,
    Substantial,
    Strong,
    VeryStrong,
    Decisive,
}

impl EvidenceCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceCategory::SupportsNull => "supports_null",
            EvidenceCategory::BareMention => "bare_mention",
            EvidenceCategory::Substantial => "substantial",
            EvidenceCategory::Strong => "strong",
            EvidenceCategory::VeryStrong => "very_strong",
            EvidenceCategory::Decisive => "decisive",
        }
    }
}

impl fmt::Display for EvidenceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const CATEGORIES_BELOW_DECISIVE: [EvidenceCategory; 5] = [
    EvidenceCategory::SupportsNull,
    EvidenceCategory::BareMention,
    EvidenceCategory::Substantial,
    EvidenceCategory::Strong,
    EvidenceCategory::VeryStrong,
];

fn raw_thresholds() -> [f64; 5] {
    let root10 = 10f64.sqrt();
    [1.0, root10, 10.0, 10.0 * root10, 100.0]
}

fn classify(value: f64, thresholds: [f64; 5]) -> EvidenceCategory {
    thresholds
        .iter()
        .zip(CATEGORIES_BELOW_DECISIVE)
        .find(|(t, _)| value <= **t)
        .map_or(EvidenceCategory::Decisive, |(_, c)| c)
}

pub fn jeffreys_category(value: f64) -> Result<EvidenceCategory> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::domain(format!(
            "evidence value must be positive and finite, got {value}"
        )));
    }
    Ok(classify(value, raw_thresholds()))
}

/// Same as [`jeffreys_category`] but takes log10 of the value, so that
/// capital too large for an `f64` can still be classified.
pub fn jeffreys_category_log10(log10_value: f64) -> Result<EvidenceCategory> {
    if log10_value.is_nan() || log10_value == f64::NEG_INFINITY {
        return Err(Error::domain("evidence value must be positive"));
    }
    Ok(classify(log10_value, [0.0, 0.5, 1.0, 1.5, 2.0]))
}

/// The calibrator `p ↦ p^{1−κ}/κ`, mapping a p-value to a Bayes factor in
/// favour of the null.
pub fn calibrate(p: f64, kappa: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p-value must lie in (0, 1], got {p}")));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    Ok(p.powf(1.0 - kappa) / kappa)
}

/// `−e·p·ln p`, the minimum of [`calibrate`] over κ ∈ (0, 1).
///
/// The minimiser is κ = −1/ln p, which lies inside (0, 1) exactly when
/// p < 1/e; for larger p the infimum sits on the boundary κ → 1 and this
/// function refuses to answer.
pub fn vovk_sellke_bound(p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::domain(format!("p-value must be positive, got {p}")));
    }
    if p >= 1.0 / E {
        return Err(Error::domain(format!(
            "p = {p} is not below 1/e; the minimum over kappa is attained at the boundary kappa -> 1"
        )));
    }
    Ok(-E * p * p.ln())
}
