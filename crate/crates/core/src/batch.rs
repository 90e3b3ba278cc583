//! Batch tests of randomness applied to whole score vectors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::nonconformity::{median_ncm, NonconformityMeasure};
use crate::observation::Observation;
use crate::randomness::SeededRandomness;
use crate::upperprob::ln_balanced_probability;

/// Smallest sample accepted by the normal approximation.
pub const BARTELS_MIN_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// Small ratios are significant (positive serial correlation, trends).
    LeftSided,
    RightSided,
}

impl Sidedness {
    pub fn as_str(self) -> &'static str {
        match self {
            Sidedness::TwoSided => "two_sided",
            Sidedness::LeftSided => "left_sided",
            Sidedness::RightSided => "right_sided",
        }
    }
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "two_sided" | "two" => Ok(Sidedness::TwoSided),
            "left_sided" | "left" => Ok(Sidedness::LeftSided),
            "right_sided" | "right" => Ok(Sidedness::RightSided),
            _ => Err(Error::domain(format!(
                "unknown sidedness {s:?}; expected two_sided, left_sided or right_sided"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchTestResult {
    pub statistic: f64,
    pub standardized: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub n: usize,
}

/// Ranks `1..=n` with tied values sharing the mean of their ranks.
pub fn midranks(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("NaN in rank input"));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Exact null variance of the rank von Neumann ratio.
pub fn rvn_variance(n: usize) -> f64 {
    let n = n as f64;
    4.0 * (n - 2.0) * (5.0 * n * n - 2.0 * n - 9.0) / (5.0 * n * (n + 1.0) * (n - 1.0).powi(2))
}

/// Bartels's rank version of the von Neumann ratio test, with the normal
/// approximation and the exact null variance.
pub fn bartels_rvn(xs: &[f64], sidedness: Sidedness) -> Result<BatchTestResult> {
    let n = xs.len();
    if n < BARTELS_MIN_N {
        return Err(Error::domain(format!(
            "rank von Neumann test needs n ≥ {BARTELS_MIN_N} for the normal approximation, \
             got {n}; use a permutation test for smaller samples"
        )));
    }
    let ranks = midranks(xs)?;
    let mean = (n as f64 + 1.0) / 2.0;
    let numerator: f64 = ranks.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum();
    let denominator: f64 = ranks.iter().map(|r| (r - mean).powi(2)).sum();
    if denominator == 0.0 {
        return Err(Error::Degenerate("constant input has no rank variation".into()));
    }
    let statistic = numerator / denominator;
    let standardized = (statistic - 2.0) / rvn_variance(n).sqrt();
    let left = normal_cdf(standardized);
    let right = normal_cdf(-standardized);
    let p = match sidedness {
        Sidedness::TwoSided => (2.0 * left.min(right)).min(1.0),
        Sidedness::LeftSided => left,
        Sidedness::RightSided => right,
    };
    // Keep the p-value positive when the normal tail underflows.
    let p_value = p.max(f64::MIN_POSITIVE);
    Ok(BatchTestResult { statistic, standardized, p_value, sidedness, n })
}

/// `f ∘ A`: scores the whole bag and applies a batch test to the scores.
pub fn compose_p_variable<M, F>(test: F, measure: &M, zs: &[Observation]) -> Result<f64>
where
    M: NonconformityMeasure + ?Sized,
    F: FnOnce(&[f64]) -> Result<f64>,
{
    let scores = measure.scores(zs)?;
    test(&scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub n: usize,
    pub trials: usize,
    /// Fraction of uniform samples whose median scores contain exactly
    /// `n/2` ones.
    pub balanced_fraction: f64,
    /// `binom(n, n/2) 2^{−n}`, the largest probability any Bernoulli power
    /// gives to the balanced score vectors.
    pub product_probability: f64,
    /// `n^{−1/2}`.
    pub bound: f64,
}

/// Samples `trials` points from the uniform distribution on `[0,1]^n` and
/// reports how often the median score vector has exactly `n/2` ones.
pub fn counterexample_demo(n: usize, trials: usize, seed: u64) -> Result<CounterexampleReport> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::domain(format!("n must be even and at least 2, got {n}")));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be positive"));
    }
    let mut rng = SeededRandomness::new(seed);
    let mut sample = vec![0.0; n];
    let mut balanced = 0usize;
    for _ in 0..trials {
        for x in sample.iter_mut() {
            *x = rng.rng_mut().random::<f64>();
        }
        let ones = median_ncm(&sample)?.iter().filter(|&&s| s == 1.0).count();
        if ones == n / 2 {
            balanced += 1;
        }
    }
    Ok(CounterexampleReport {
        n,
        trials,
        balanced_fraction: balanced as f64 / trials as f64,
        product_probability: ln_balanced_probability(n).exp(),
        bound: 1.0 / (n as f64).sqrt(),
    })
}
