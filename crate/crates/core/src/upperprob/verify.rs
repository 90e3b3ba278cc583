//! Brute-force sweeps over events checking the upper-probability bounds.

use rand::Rng;
use serde::Serialize;

use super::events::{index_to_sequence, EventSet, MAX_HORIZON};
use super::probability::{binomial, ln_binomial, ucp_bracket, uep_from_counts, UiidOptimizer};
use super::reckless::{identity_pvalues, Exact, RecklessMartingale};
use crate::error::{Error, Result};
use crate::randomness::{derive_seed, SeededRandomness};

/// The constant `1.5` in `UEP ≤ 1.5 √N UiidP`.
pub const PROP1_CONSTANT: f64 = 1.5;

/// The sharper constant `√(2π) e^{1/6} / 2 ≈ 1.481`.
pub fn sharp_constant() -> f64 {
    (2.0 * std::f64::consts::PI).sqrt() * (1.0f64 / 6.0).exp() / 2.0
}

/// Absolute tolerance for comparisons that are exact in real arithmetic but
/// go through floating-point sums.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// Largest horizon for which every single-level event is enumerated.
pub const EXHAUSTIVE_LEVEL_MAX: usize = 12;

/// Largest horizon for exhaustive reckless-martingale sweeps.
pub const PROP2_MAX: usize = 12;

/// Draws a random nonempty event. The inclusion probability is
/// `2^{−uN}` with `u` uniform, so event sizes spread evenly on a log scale
/// between a single sequence and the whole space.
pub fn random_event(horizon: usize, rng: &mut impl Rng) -> Result<EventSet> {
    let mut e = EventSet::empty(horizon)?;
    let space = 1u64 << horizon;
    while e.is_empty() {
        if horizon <= 16 {
            let q = 2f64.powf(-rng.random::<f64>() * horizon as f64);
            for idx in 0..space {
                if rng.random::<f64>() < q {
                    e.insert_index(idx);
                }
            }
        } else {
            let size = 2f64.powf(rng.random::<f64>() * 16.0) as u64;
            for _ in 0..size.max(1) {
                e.insert_index(rng.random_range(0..space));
            }
        }
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Report {
    pub horizon: usize,
    pub events_checked: u64,
    /// Whether all single-level events and singletons were included.
    pub exhaustive: bool,
    /// Events with `UiidP > UEP`.
    pub lower_violations: u64,
    /// Events with `UEP > 1.5 √N UiidP`.
    pub upper_violations: u64,
    /// Events with `UEP` above the sharper constant times `√N UiidP`.
    pub sharp_violations: u64,
    /// Largest observed `UEP / (√N UiidP)`.
    pub max_ratio: f64,
    /// Level counts of the event attaining `max_ratio`.
    pub max_ratio_counts: Vec<u64>,
}

impl Prop1Report {
    pub fn holds(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0 && self.sharp_violations == 0
    }

    fn check(&mut self, opt: &UiidOptimizer, counts: &[u64]) {
        let uiid = opt.maximize(counts).value;
        let uep = uep_from_counts(counts);
        let root_n = (self.horizon as f64).sqrt();
        self.events_checked += 1;
        if uiid > uep + ROUNDING_SLACK {
            self.lower_violations += 1;
        }
        if uep > PROP1_CONSTANT * root_n * uiid {
            self.upper_violations += 1;
        }
        if uep > sharp_constant() * root_n * uiid {
            self.sharp_violations += 1;
        }
        let ratio = uep / (root_n * uiid);
        if ratio > self.max_ratio {
            self.max_ratio = ratio;
            self.max_ratio_counts = counts.to_vec();
        }
    }
}

/// Checks `UiidP(E) ≤ UEP(E) ≤ 1.5 √N UiidP(E)` over every single-level
/// event and every singleton (for `N ≤ 12`) and over `random_events` random
/// nonempty events.
///
/// Both probabilities depend on `E` only through its level counts, so the
/// single-level events are enumerated as all pairs `(k, c)` with
/// `1 ≤ c ≤ binom(N, k)`.
pub fn verify_prop1(horizon: usize, random_events: usize, seed: u64) -> Result<Prop1Report> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(Error::domain(format!("horizon must lie in 1..={MAX_HORIZON}")));
    }
    let opt = UiidOptimizer::new(horizon);
    let exhaustive = horizon <= EXHAUSTIVE_LEVEL_MAX;
    let mut report = Prop1Report {
        horizon,
        events_checked: 0,
        exhaustive,
        lower_violations: 0,
        upper_violations: 0,
        sharp_violations: 0,
        max_ratio: 0.0,
        max_ratio_counts: Vec::new(),
    };
    if exhaustive {
        let mut counts = vec![0u64; horizon + 1];
        for k in 0..=horizon {
            for c in 1..=binomial(horizon as u64, k as u64) as u64 {
                counts[k] = c;
                report.check(&opt, &counts);
            }
            counts[k] = 0;
        }
        for idx in 0..1u64 << horizon {
            let mut counts = vec![0u64; horizon + 1];
            counts[idx.count_ones() as usize] = 1;
            report.check(&opt, &counts);
        }
    }
    let mut rng = SeededRandomness::new(seed);
    for _ in 0..random_events {
        let e = random_event(horizon, rng.rng_mut())?;
        report.check(&opt, e.level_counts());
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Report {
    pub horizon: usize,
    pub sequences_checked: u64,
    pub theta_runs: usize,
    /// Targets whose initial capital differs from `1/binom(N, k)`.
    pub initial_capital_mismatches: u64,
    /// Largest `|∫ f_n − 1|` of the floating-point betting functions.
    pub max_axiom_error: f64,
    /// Steps whose exact rational integral is not 1.
    pub exact_axiom_failures: u64,
    /// Runs on the target itself not ending with capital exactly 1.
    pub final_capital_failures: u64,
    /// Runs on a different sequence of the same level not ending at 0.
    pub same_level_nonzero: u64,
    pub events_checked: u64,
    /// Events with bracket `lower > upper`.
    pub bracket_order_violations: u64,
    /// Events avoiding the all-zero sequence with `upper > N · UEP`.
    pub bracket_bound_violations: u64,
    /// Largest `upper / (N · UEP)` over events avoiding the all-zero sequence.
    pub max_upper_over_n_uep: f64,
}

impl Prop2Report {
    pub fn holds(&self) -> bool {
        self.initial_capital_mismatches == 0
            && self.max_axiom_error < 1e-12
            && self.exact_axiom_failures == 0
            && self.final_capital_failures == 0
            && self.same_level_nonzero == 0
            && self.bracket_order_violations == 0
            && self.bracket_bound_violations == 0
    }
}

/// Builds the reckless martingale for every `ω ∈ {0,1}^N` and checks its
/// initial capital, the betting axiom at each step, and that it ends with
/// capital exactly 1 on `ω` for `theta_runs` independent tie-breaking
/// streams. Then checks the conformal-probability bracket on
/// `random_events` random events.
pub fn verify_prop2(
    horizon: usize,
    theta_runs: usize,
    random_events: usize,
    seed: u64,
) -> Result<Prop2Report> {
    if horizon == 0 || horizon > PROP2_MAX {
        return Err(Error::domain(format!("horizon must lie in 1..={PROP2_MAX}")));
    }
    let mut report = Prop2Report {
        horizon,
        sequences_checked: 0,
        theta_runs,
        initial_capital_mismatches: 0,
        max_axiom_error: 0.0,
        exact_axiom_failures: 0,
        final_capital_failures: 0,
        same_level_nonzero: 0,
        events_checked: 0,
        bracket_order_violations: 0,
        bracket_bound_violations: 0,
        max_upper_over_n_uep: 0.0,
    };
    let one = Exact::from_integer(1);
    let zero = Exact::from_integer(0);
    let space = 1u64 << horizon;
    for idx in 0..space {
        let omega = index_to_sequence(idx, horizon);
        let m = RecklessMartingale::new(&omega)?;
        let k = idx.count_ones() as u64;
        report.sequences_checked += 1;
        if m.initial_capital_exact() != Exact::new(1, binomial(horizon as u64, k)) {
            report.initial_capital_mismatches += 1;
        }
        for n in 1..=horizon {
            if m.exact_integral(n)? != one {
                report.exact_axiom_failures += 1;
            }
            let err = (m.betting_function(n)?.integral() - 1.0).abs();
            report.max_axiom_error = report.max_axiom_error.max(err);
        }
        for run in 0..theta_runs {
            let ps = identity_pvalues(&omega, derive_seed(seed, idx * theta_runs as u64 + run as u64))?;
            if m.run_exact(&ps)? != one {
                report.final_capital_failures += 1;
            }
        }
        for other in (0..space).filter(|&o| o != idx && o.count_ones() as u64 == k) {
            let ps = identity_pvalues(&index_to_sequence(other, horizon), derive_seed(!seed, other))?;
            if m.run_exact(&ps)? != zero {
                report.same_level_nonzero += 1;
            }
        }
    }
    let mut rng = SeededRandomness::new(seed);
    for _ in 0..random_events {
        let e = random_event(horizon, rng.rng_mut())?;
        report.events_checked += 1;
        let b = ucp_bracket(&e);
        if b.lower > b.upper {
            report.bracket_order_violations += 1;
        }
        if !e.contains_all_zero() {
            let bound = horizon as f64 * b.lower;
            if b.upper > bound * (1.0 + ROUNDING_SLACK) {
                report.bracket_bound_violations += 1;
            }
            report.max_upper_over_n_uep = report.max_upper_over_n_uep.max(b.upper / bound);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StirlingReport {
    /// Factorial bracket checked for `1 ≤ n ≤ factorial_max`.
    pub factorial_max: usize,
    pub factorial_violations: Vec<usize>,
    /// `min_n (r_n − 1/(12n+1))`.
    pub min_lower_margin: f64,
    /// `min_n (1/(12n) − r_n)`.
    pub min_upper_margin: f64,
    /// Balanced bound checked for even `2 ≤ N ≤ balanced_max`.
    pub balanced_max: usize,
    pub balanced_checked: usize,
    pub balanced_violations: Vec<usize>,
    /// `min_N (−½ ln N − ln(binom(N, N/2) 2^{−N}))`.
    pub min_balanced_margin: f64,
}

impl StirlingReport {
    pub fn holds(&self) -> bool {
        self.factorial_violations.is_empty() && self.balanced_violations.is_empty()
    }
}

/// Largest `n` whose factorial is finite in `f64`.
pub const DIRECT_FACTORIAL_MAX: usize = 170;

/// The Stirling remainder `r_n = ln n! − ln √(2π) − (n + ½) ln n + n`, with
/// `n!` formed directly as a floating-point product.
pub fn stirling_remainder(n: usize) -> f64 {
    assert!((1..=DIRECT_FACTORIAL_MAX).contains(&n));
    let factorial: f64 = (1..=n).map(|i| i as f64).product();
    let nf = n as f64;
    factorial.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - (nf + 0.5) * nf.ln() + nf
}

/// `ln(binom(N, N/2) 2^{−N})`.
pub fn ln_balanced_probability(n: usize) -> f64 {
    ln_binomial(n as u64, n as u64 / 2) - n as f64 * std::f64::consts::LN_2
}

/// Checks `1/(12n+1) < r_n < 1/(12n)` for `n ≤ min(N_max, 170)` and
/// `binom(N, N/2) 2^{−N} < N^{−1/2}` for every even `N ≤ N_max`.
pub fn stirling_checks(n_max: usize) -> StirlingReport {
    let factorial_max = n_max.min(DIRECT_FACTORIAL_MAX);
    let mut report = StirlingReport {
        factorial_max,
        factorial_violations: Vec::new(),
        min_lower_margin: f64::INFINITY,
        min_upper_margin: f64::INFINITY,
        balanced_max: n_max,
        balanced_checked: 0,
        balanced_violations: Vec::new(),
        min_balanced_margin: f64::INFINITY,
    };
    for n in 1..=factorial_max {
        let r = stirling_remainder(n);
        let lower = r - 1.0 / (12.0 * n as f64 + 1.0);
        let upper = 1.0 / (12.0 * n as f64) - r;
        if !(lower > 0.0 && upper > 0.0) {
            report.factorial_violations.push(n);
        }
        report.min_lower_margin = report.min_lower_margin.min(lower);
        report.min_upper_margin = report.min_upper_margin.min(upper);
    }
    for n in (2..=n_max).step_by(2) {
        let margin = -0.5 * (n as f64).ln() - ln_balanced_probability(n);
        report.balanced_checked += 1;
        if !(margin > 0.0) {
            report.balanced_violations.push(n);
        }
        report.min_balanced_margin = report.min_balanced_margin.min(margin);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sharp_constant_value() {
        assert_relative_eq!(sharp_constant(), 1.480_615_7, epsilon = 1e-7);
    }

    #[test]
    fn prop1_two_point_ratio() {
        let r = verify_prop1(2, 0, 0).unwrap();
        assert!(r.holds());
        assert_relative_eq!(r.max_ratio, 2f64.sqrt(), epsilon = 1e-9);
        assert_eq!(r.max_ratio_counts, vec![0, 1, 0]);
        // Single levels: 1 + 2 + 1, singletons: 4.
        assert_eq!(r.events_checked, 8);
    }

    #[test]
    fn prop1_small_sweep() {
        let r = verify_prop1(6, 300, 5).unwrap();
        assert!(r.holds(), "{r:?}");
        assert_eq!(r.events_checked, 64 + 64 + 300);
    }

    #[test]
    fn prop2_small_sweep() {
        let r = verify_prop2(4, 5, 200, 9).unwrap();
        assert!(r.holds(), "{r:?}");
        assert_eq!(r.sequences_checked, 16);
        assert!(r.max_upper_over_n_uep <= 1.0);
        assert!(verify_prop2(13, 1, 1, 0).is_err());
    }

    #[test]
    fn stirling_first_terms() {
        // r_1 = 1 − ln √(2π).
        assert_relative_eq!(stirling_remainder(1), 0.081_061_466_795_327_26, epsilon = 1e-15);
        let r = stirling_checks(2);
        assert!(r.holds());
        assert_relative_eq!(ln_balanced_probability(2), 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn balanced_bound_at_thousand() {
        // Oracle: sum of logs, independent of the gamma function.
        let ln_c: f64 = (501..=1000).map(|i| (i as f64).ln()).sum::<f64>()
            - (1..=500).map(|i| (i as f64).ln()).sum::<f64>();
        let ln_p = ln_c - 1000.0 * std::f64::consts::LN_2;
        assert_relative_eq!(ln_balanced_probability(1000), ln_p, epsilon = 1e-9);
        assert!(ln_p < -0.5 * 1000f64.ln());
    }

    #[test]
    fn random_events_are_nonempty_and_varied() {
        let mut rng = SeededRandomness::new(1);
        let sizes: Vec<u64> = (0..200)
            .map(|_| random_event(8, rng.rng_mut()).unwrap().len())
            .collect();
        assert!(sizes.iter().all(|&s| s >= 1));
        assert!(sizes.iter().any(|&s| s < 4));
        assert!(sizes.iter().any(|&s| s > 128));
    }
}
