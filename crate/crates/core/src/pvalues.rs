//! The conformal transducer: observations plus tie-breaking randomness in,
//! conformal p-values out.
//!
//! After `n` observations the p-value of the newest one is
//!
//! ```text
//! p_n = (#{i : α_i > α_n} + θ_n · #{i : α_i = α_n}) / n
//! ```
//!
//! with `i` ranging over all `n` observations (so `α_n` always ties with
//! itself) and `θ_n` uniform on `[0, 1)`.

use crate::error::{Error, Result};
use crate::nonconformity::{difference_score, ratio_score, Distance, NonconformityMeasure};
use crate::observation::Observation;
use crate::randomness::SeededRandomness;

/// How the newest score ranks among all scores in the bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCounts {
    /// Scores strictly greater than the newest one.
    pub greater: usize,
    /// Scores equal to the newest one, the newest included.
    pub equal: usize,
    /// Bag size.
    pub n: usize,
}

impl RankCounts {
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        let (&last, _) = scores
            .split_last()
            .ok_or_else(|| Error::domain("p-value of an empty score vector"))?;
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::domain("NaN nonconformity score"));
        }
        let mut counts = RankCounts { greater: 0, equal: 0, n: scores.len() };
        for &s in scores {
            if s > last {
                counts.greater += 1;
            } else if s == last {
                counts.equal += 1;
            }
        }
        Ok(counts)
    }

    pub fn p_value(&self, theta: f64) -> f64 {
        (self.greater as f64 + theta * self.equal as f64) / self.n as f64
    }
}

/// Conformal p-value of the last score in `scores`.
pub fn conformal_pvalue(scores: &[f64], theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!("theta must lie in [0, 1], got {theta}")));
    }
    Ok(RankCounts::from_scores(scores)?.p_value(theta))
}

/// Online scoring state: absorbs one observation at a time and reports how
/// the newest observation ranks in the bag seen so far.
pub trait OnlineScorer: Send {
    fn push(&mut self, z: Observation) -> Result<RankCounts>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl OnlineScorer for Box<dyn OnlineScorer> {
    fn push(&mut self, z: Observation) -> Result<RankCounts> {
        (**self).push(z)
    }
    fn len(&self) -> usize {
        (**self).len()
    }
}

/// Rescores the full bag with a [`NonconformityMeasure`] at every step.
#[derive(Debug, Clone)]
pub struct Rescoring<M> {
    measure: M,
    bag: Vec<Observation>,
}

impl<M: NonconformityMeasure> Rescoring<M> {
    pub fn new(measure: M) -> Self {
        Self { measure, bag: Vec::new() }
    }

    pub fn bag(&self) -> &[Observation] {
        &self.bag
    }
}

impl<M: NonconformityMeasure> OnlineScorer for Rescoring<M> {
    fn push(&mut self, z: Observation) -> Result<RankCounts> {
        self.bag.push(z);
        match self.measure.scores(&self.bag).and_then(|s| RankCounts::from_scores(&s)) {
            Ok(counts) => Ok(counts),
            Err(e) => {
                self.bag.pop();
                Err(e)
            }
        }
    }

    fn len(&self) -> usize {
        self.bag.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnMode {
    Ratio,
    Difference,
}

/// Incremental 1-nearest-neighbour scoring.
///
/// Keeps, for every stored observation, its nearest same-label and
/// other-label distances; a new observation costs `O(n · dim)` instead of the
/// `O(n² · dim)` of rescoring. Scores are bit-identical to
/// [`crate::nonconformity::knn_ratio_score`] / `knn_diff_score`.
pub struct IncrementalKnn<D> {
    distance: D,
    mode: KnnMode,
    dim: Option<usize>,
    features: Vec<f64>,
    labels: Vec<u32>,
    same: Vec<f64>,
    other: Vec<f64>,
    scores: Vec<f64>,
}

impl<D: Distance> IncrementalKnn<D> {
    pub fn new(distance: D, mode: KnnMode) -> Self {
        Self {
            distance,
            mode,
            dim: None,
            features: Vec::new(),
            labels: Vec::new(),
            same: Vec::new(),
            other: Vec::new(),
            scores: Vec::new(),
        }
    }

    fn score(&self, same: f64, other: f64) -> f64 {
        match self.mode {
            KnnMode::Ratio => ratio_score(same, other),
            KnnMode::Difference => difference_score(same, other),
        }
    }

    /// Current scores of the whole bag.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

impl<D: Distance> OnlineScorer for IncrementalKnn<D> {
    fn push(&mut self, z: Observation) -> Result<RankCounts> {
        let label = z.label.ok_or_else(|| {
            Error::Incompatible("nearest-neighbour scores need labeled observations".into())
        })?;
        let dim = *self.dim.get_or_insert(z.dim());
        if z.dim() != dim {
            return Err(Error::Incompatible(format!(
                "feature dimension {} differs from stream dimension {dim}",
                z.dim()
            )));
        }
        let x = &z.features;
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Incompatible("NaN feature value".into()));
        }
        let symmetric = self.distance.is_symmetric();
        let (mut new_same, mut new_other) = (f64::INFINITY, f64::INFINITY);
        for j in 0..self.labels.len() {
            let xj = &self.features[j * dim..(j + 1) * dim];
            let to_new = self.distance.distance(xj, x);
            let from_new = if symmetric { to_new } else { self.distance.distance(x, xj) };
            if self.labels[j] == label {
                if to_new < self.same[j] {
                    self.same[j] = to_new;
                    self.scores[j] = self.score(to_new, self.other[j]);
                }
                new_same = new_same.min(from_new);
            } else {
                if to_new < self.other[j] {
                    self.other[j] = to_new;
                    self.scores[j] = self.score(self.same[j], to_new);
                }
                new_other = new_other.min(from_new);
            }
        }
        let last = self.score(new_same, new_other);
        if last.is_nan() {
            return Err(Error::domain("NaN nonconformity score"));
        }
        self.features.extend_from_slice(x);
        self.labels.push(label);
        self.same.push(new_same);
        self.other.push(new_other);
        self.scores.push(last);

        let mut counts = RankCounts { greater: 0, equal: 0, n: self.labels.len() };
        for &a in &self.scores {
            counts.greater += usize::from(a > last);
            counts.equal += usize::from(a == last);
        }
        Ok(counts)
    }

    fn len(&self) -> usize {
        self.labels.len()
    }
}

/// Incremental identity scoring for scalar observations: the score of an
/// observation is its value, and earlier scores never change, so a sorted
/// buffer answers each step with two binary searches.
#[derive(Debug, Clone, Default)]
pub struct IncrementalIdentity {
    sorted: Vec<f64>,
}

impl IncrementalIdentity {
    pub fn new() -> Self {
        Self::default()
    }
}

impl OnlineScorer for IncrementalIdentity {
    fn push(&mut self, z: Observation) -> Result<RankCounts> {
        let v = z.as_scalar()?;
        if v.is_nan() {
            return Err(Error::domain("NaN observation"));
        }
        let below = self.sorted.partition_point(|&s| s < v);
        let not_above = below + self.sorted[below..].partition_point(|&s| s <= v);
        self.sorted.insert(not_above, v);
        let n = self.sorted.len();
        Ok(RankCounts {
            greater: n - not_above - 1,
            equal: not_above - below + 1,
            n,
        })
    }

    fn len(&self) -> usize {
        self.sorted.len()
    }
}

/// Turns a stream of observations into conformal p-values, one per step.
pub struct ConformalTransducer<S> {
    scorer: S,
    randomness: SeededRandomness,
    reference: Option<Observation>,
}

impl<S: OnlineScorer> ConformalTransducer<S> {
    pub fn new(scorer: S, seed: u64) -> Self {
        Self::with_randomness(scorer, SeededRandomness::new(seed))
    }

    pub fn with_randomness(scorer: S, randomness: SeededRandomness) -> Self {
        Self { scorer, randomness, reference: None }
    }

    /// Number of p-values emitted so far.
    pub fn steps(&self) -> usize {
        self.scorer.len()
    }

    /// Absorbs `z` and returns its p-value, drawing `θ` from the transducer's
    /// own randomness stream.
    pub fn step(&mut self, z: Observation) -> Result<f64> {
        let theta = self.randomness.uniform();
        self.step_with_theta(z, theta)
    }

    /// Like [`step`](Self::step) with an externally supplied `θ`.
    pub fn step_with_theta(&mut self, z: Observation, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::domain(format!("theta must lie in [0, 1], got {theta}")));
        }
        match &self.reference {
            Some(r) => z.check_compatible(r)?,
            None => self.reference = Some(z.clone()),
        }
        Ok(self.scorer.push(z)?.p_value(theta))
    }

    pub fn scorer(&self) -> &S {
        &self.scorer
    }
}
