//! Upper IID, exchangeability and conformal probabilities of events.

use statrs::function::gamma::ln_gamma;

use super::events::EventSet;

/// Grid cells used to locate the maximum of the IID objective.
pub const GRID_CELLS: usize = 10_000;
/// Width of the bracket at which golden-section refinement stops.
pub const REFINE_TOLERANCE: f64 = 1e-10;

/// Largest `n` for which [`binomial`] is exact.
pub const EXACT_BINOMIAL_MAX: u64 = 100;

/// Exact binomial coefficient, for `n ≤ EXACT_BINOMIAL_MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    assert!(n <= EXACT_BINOMIAL_MAX, "exact binomial limited to n ≤ {EXACT_BINOMIAL_MAX}");
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (n as u128 - i) / (i + 1);
    }
    c
}

/// `ln binom(n, k)`; exact integer arithmetic for small `n`, log-gamma beyond.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= EXACT_BINOMIAL_MAX {
        return (binomial(n, k) as f64).ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `Σ_k c_k p^k (1−p)^{N−k}`, the probability of the event under the power
/// of Bernoulli(p). `counts` has length `N + 1`.
pub fn iid_probability(counts: &[u64], p: f64) -> f64 {
    let n = counts.len() as i32 - 1;
    let q = 1.0 - p;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| c as f64 * p.powi(k as i32) * q.powi(n - k as i32))
        .sum()
}

/// Location and value of the maximal IID probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UiidMaximum {
    pub value: f64,
    pub argmax: f64,
}

/// Maximizes the IID objective for one horizon. The basis values
/// `p^k (1−p)^{N−k}` on the grid are computed once and reused for every event.
#[derive(Debug, Clone)]
pub struct UiidOptimizer {
    horizon: usize,
    table: Vec<f64>,
}

impl UiidOptimizer {
    pub fn new(horizon: usize) -> Self {
        let width = horizon + 1;
        let mut table = Vec::with_capacity((GRID_CELLS + 1) * width);
        for j in 0..=GRID_CELLS {
            let p = j as f64 / GRID_CELLS as f64;
            let q = 1.0 - p;
            for k in 0..=horizon {
                table.push(p.powi(k as i32) * q.powi((horizon - k) as i32));
            }
        }
        Self { horizon, table }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn maximize(&self, counts: &[u64]) -> UiidMaximum {
        assert_eq!(counts.len(), self.horizon + 1, "level counts do not match the horizon");
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let mut best = UiidMaximum { value: f64::NEG_INFINITY, argmax: 0.0 };
        let mut best_j = 0;
        for (j, row) in self.table.chunks_exact(self.horizon + 1).enumerate() {
            let v: f64 = row.iter().zip(&weights).map(|(b, w)| b * w).sum();
            if v > best.value {
                best = UiidMaximum { value: v, argmax: j as f64 / GRID_CELLS as f64 };
                best_j = j;
            }
        }
        // The endpoints are grid points, so their values are already exact.
        let lo = best_j.saturating_sub(1) as f64 / GRID_CELLS as f64;
        let hi = (best_j + 1).min(GRID_CELLS) as f64 / GRID_CELLS as f64;
        let refined = golden_section_max(|p| iid_probability(counts, p), lo, hi);
        if refined.value > best.value {
            best = refined;
        }
        best
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> UiidMaximum {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > REFINE_TOLERANCE {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        UiidMaximum { value: f1, argmax: x1 }
    } else {
        UiidMaximum { value: f2, argmax: x2 }
    }
}

/// Upper IID probability: the largest probability of `E` under any power of a
/// Bernoulli distribution.
pub fn uiid_prob(event: &EventSet) -> f64 {
    UiidOptimizer::new(event.horizon()).maximize(event.level_counts()).value
}

/// Upper exchangeability probability, `max_k c_k / binom(N, k)`.
pub fn uep_prob(event: &EventSet) -> f64 {
    uep_from_counts(event.level_counts())
}

pub fn uep_from_counts(counts: &[u64]) -> f64 {
    let n = counts.len() as u64 - 1;
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / binomial(n, k as u64) as f64)
        .fold(0.0, f64::max)
}

/// Bracket on the upper conformal probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcpBracket {
    pub lower: f64,
    pub upper: f64,
}

/// `lower` is the exchangeability probability; `upper` is the initial capital
/// of the sum of reckless martingales over the members of `E`, capped at 1.
pub fn ucp_bracket(event: &EventSet) -> UcpBracket {
    let counts = event.level_counts();
    let n = event.horizon() as u64;
    let cost: f64 = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / binomial(n, k as u64) as f64)
        .sum();
    UcpBracket { lower: uep_from_counts(counts), upper: cost.min(1.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::upperprob::events::parse_bitstring;
    use approx::assert_relative_eq;

    fn event(n: usize, members: &[&str]) -> EventSet {
        EventSet::from_bitstrings(n, members).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(24, 12), 2_704_156);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(100, 50), 100_891_344_545_564_193_334_812_497_256);
        assert_relative_eq!(ln_binomial(200, 100), 135.753_236_081_278_5, epsilon = 1e-10);
        assert_relative_eq!(ln_binomial(100, 50), (binomial(100, 50) as f64).ln());
    }

    #[test]
    fn singleton_attains_at_frequency() {
        for (n, bits) in [(5, "01101"), (7, "1000000"), (3, "111"), (6, "000000")] {
            let seq = parse_bitstring(bits).unwrap();
            let k = seq.iter().filter(|&&b| b).count() as f64;
            let f = k / n as f64;
            let expected = f.powf(k) * (1.0 - f).powf(n as f64 - k);
            let got = uiid_prob(&EventSet::singleton(&seq).unwrap());
            assert_relative_eq!(got, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn full_space_and_balanced_level() {
        assert_relative_eq!(uiid_prob(&EventSet::full(6).unwrap()), 1.0, epsilon = 1e-12);
        assert_relative_eq!(uiid_prob(&EventSet::level(4, 2).unwrap()), 0.375, epsilon = 1e-15);
        assert_eq!(uep_prob(&EventSet::level(4, 2).unwrap()), 1.0);
    }

    #[test]
    fn uiid_matches_brute_force_scan() {
        // A bimodal objective: the all-zero and all-one sequences.
        let e = event(6, &["000000", "111111", "010101"]);
        let scan = (0..=200_000)
            .map(|j| iid_probability(e.level_counts(), j as f64 / 200_000.0))
            .fold(0.0, f64::max);
        let got = uiid_prob(&e);
        assert!(got >= scan - 1e-12 && got <= scan + 1e-9, "{got} vs {scan}");
    }

    #[test]
    fn two_point_remark() {
        let e = event(2, &["01"]);
        assert_relative_eq!(uiid_prob(&e), 0.25, epsilon = 1e-15);
        assert_eq!(uep_prob(&e), 0.5);
        assert_eq!(uep_prob(&EventSet::empty(3).unwrap()), 0.0);
    }

    #[test]
    fn ucp_examples() {
        let seq = parse_bitstring("0110100").unwrap();
        let b = ucp_bracket(&EventSet::singleton(&seq).unwrap());
        assert_eq!(b.lower, 1.0 / 35.0);
        assert_eq!(b.upper, b.lower);
        let b = ucp_bracket(&EventSet::full(5).unwrap());
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        let b = ucp_bracket(&event(3, &["011", "101"]));
        assert_eq!(b.lower, 2.0 / 3.0);
        assert_eq!(b.upper, 2.0 / 3.0);
        let b = ucp_bracket(&event(3, &["011", "100"]));
        assert_eq!(b.lower, 1.0 / 3.0);
        assert_eq!(b.upper, 2.0 / 3.0);
    }
}
