//! Seeded Monte Carlo checks of distributional claims. Each uses a fixed
//! seed set, so outcomes are deterministic.

use std::collections::HashMap;

use conformal::batch::{bartels_rvn, compose_p_variable, Sidedness};
use conformal::datasets::{permute, synth_stream, Generator, SyntheticSpec};
use conformal::nonconformity::{Euclidean, KnnRatio};
use conformal::pvalues::{ConformalTransducer, IncrementalIdentity, IncrementalKnn, KnnMode};
use conformal::randomness::derive_seed;
use conformal::stats::{ks_critical_1pct, ks_uniform, lag1_autocorrelation, mean, std_error};
use conformal::{Observation, SeededRandomness};

fn uniforms(n: usize, seed: u64) -> Vec<f64> {
    let mut r = SeededRandomness::new(seed);
    (0..n).map(|_| r.uniform()).collect()
}

#[test]
fn rvn_null_mean_is_two() {
    let base: Vec<f64> = (0..30).map(f64::from).collect();
    let stats: Vec<f64> = (0..4000)
        .map(|i| bartels_rvn(&permute(&base, derive_seed(3, i)), Sidedness::TwoSided).unwrap().statistic)
        .collect();
    let (m, se) = (mean(&stats), std_error(&stats));
    assert!((m - 2.0).abs() < 3.0 * se, "mean {m}, se {se}");
}

#[test]
fn rvn_pvalues_are_uniform_under_the_null() {
    let ps: Vec<f64> = (0..10_000)
        .map(|i| bartels_rvn(&uniforms(100, derive_seed(4, i)), Sidedness::TwoSided).unwrap().p_value)
        .collect();
    let d = ks_uniform(&ps);
    assert!(d < ks_critical_1pct(ps.len()), "KS {d}");
}

#[test]
fn composed_test_keeps_its_size() {
    let gen: Generator = "labeled:2,0.5,1,1".parse().unwrap();
    let runs = 2000;
    let alpha = 0.05;
    let rejections = (0..runs)
        .filter(|&i| {
            let zs = synth_stream(&SyntheticSpec::iid(gen.clone(), 60, derive_seed(5, i))).unwrap();
            let p = compose_p_variable(
                |xs| Ok(bartels_rvn(xs, Sidedness::TwoSided)?.p_value),
                &KnnRatio(Euclidean),
                &zs,
            )
            .unwrap();
            p <= alpha
        })
        .count();
    let rate = rejections as f64 / runs as f64;
    let se = (alpha * (1.0 - alpha) / runs as f64).sqrt();
    assert!((rate - alpha).abs() <= 3.0 * se, "rejection rate {rate}");
}

#[test]
fn adjacent_pvalues_are_uncorrelated() {
    let gen: Generator = "labeled:2,0.5,1,1".parse().unwrap();
    let n = 2000;
    // Bound on |r| at the 1% level for an IID sequence of length n.
    let bound = 2.5758 / (n as f64).sqrt();
    let mut rejected = 0;
    for run in 0..40 {
        let zs = synth_stream(&SyntheticSpec::iid(gen.clone(), n, derive_seed(6, run))).unwrap();
        let mut t = ConformalTransducer::new(IncrementalKnn::new(Euclidean, KnnMode::Ratio), derive_seed(7, run));
        let ps: Vec<f64> = zs.into_iter().map(|z| t.step(z).unwrap()).collect();
        if lag1_autocorrelation(&ps).abs() > bound {
            rejected += 1;
        }
    }
    assert!(rejected <= 3, "{rejected}/40 runs show lag-1 correlation");
}

#[test]
fn identity_pvalues_with_ties_are_uniform() {
    // Heavy ties: the randomised tie-breaking must still give exact uniformity.
    let population: Vec<Observation> = (0..500).map(|i| Observation::scalar((i % 3) as f64)).collect();
    let mut passed = 0;
    for run in 0..20 {
        let stream = permute(&population, derive_seed(8, run));
        let mut t = ConformalTransducer::new(IncrementalIdentity::new(), derive_seed(9, run));
        let ps: Vec<f64> = stream.into_iter().map(|z| t.step(z).unwrap()).collect();
        if ks_uniform(&ps) < ks_critical_1pct(ps.len()) {
            passed += 1;
        }
    }
    assert!(passed >= 19, "{passed}/20");
}

#[test]
fn double_permutation_is_uniform() {
    for n in 1..=5usize {
        let items: Vec<usize> = (0..n).collect();
        let perms: usize = (1..=n).product();
        let draws = 2000 * perms;
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        for i in 0..draws as u64 {
            let once = permute(&items, derive_seed(10, i));
            let twice = permute(&once, derive_seed(11, i));
            let mut sorted = twice.clone();
            sorted.sort();
            assert_eq!(sorted, items);
            *freq.entry(twice).or_default() += 1;
        }
        assert_eq!(freq.len(), perms);
        // Pearson chi-square against the uniform law on all n! orderings.
        let expected = draws as f64 / perms as f64;
        let chi2: f64 = freq.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let df = (perms - 1).max(1) as f64;
        // Generous upper tail: mean plus five standard deviations.
        assert!(chi2 <= df + 5.0 * (2.0 * df).sqrt(), "n = {n}: chi2 {chi2}");
    }
}

#[test]
fn permute_is_deterministic() {
    let items: Vec<u32> = (0..100).collect();
    assert_eq!(permute(&items, 42), permute(&items, 42));
    assert_ne!(permute(&items, 42), permute(&items, 43));
}
