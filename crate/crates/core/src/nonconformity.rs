//! Equivariant nonconformity measures.
//!
//! A nonconformity measure maps a bag of observations to one strangeness
//! score per observation. Every measure here is equivariant: permuting the
//! bag permutes the scores in the same way. Scores are extended reals; the
//! nearest-neighbour measures use ±∞ as sentinels when a minimum is taken
//! over an empty set.

use crate::error::{Error, Result};
use crate::observation::Observation;

/// A pairwise dissimilarity between feature vectors. `d(x, x) = 0` is
/// expected; symmetry is not.
pub trait Distance: Send + Sync {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;

    /// Whether `d(a, b) == d(b, a)` holds bit-for-bit, letting callers
    /// evaluate each pair once.
    fn is_symmetric(&self) -> bool {
        false
    }
}

impl<F> Distance for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self(a, b)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Distance for Euclidean {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

/// `(x, y) ↦ (d(x, y) + d(y, x)) / 2`.
#[derive(Debug, Clone, Copy)]
pub struct Symmetrized<D>(pub D);

impl<D: Distance> Distance for Symmetrized<D> {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        0.5 * (self.0.distance(a, b) + self.0.distance(b, a))
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

pub fn symmetrize_distance<D: Distance>(d: D) -> Symmetrized<D> {
    Symmetrized(d)
}

/// Maps a bag of observations to per-observation nonconformity scores.
pub trait NonconformityMeasure: Send + Sync {
    fn scores(&self, bag: &[Observation]) -> Result<Vec<f64>>;
}

/// Combines the same-label and other-label nearest distances into a ratio score.
///
/// An empty same-label set (`same = ∞`) makes the point maximally strange. An
/// empty other-label set then gives 0. A zero denominator gives `+∞`, and
/// `0/0` is read as the neutral value 1.
pub(crate) fn ratio_score(same: f64, other: f64) -> f64 {
    if same == f64::INFINITY {
        f64::INFINITY
    } else if other == f64::INFINITY {
        0.0
    } else if other == 0.0 {
        if same == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        same / other
    }
}

pub(crate) fn difference_score(same: f64, other: f64) -> f64 {
    if same == f64::INFINITY {
        f64::INFINITY
    } else if other == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        same - other
    }
}

fn label_of(z: &Observation, index: usize) -> Result<u32> {
    z.label.ok_or_else(|| {
        Error::Incompatible(format!(
            "nearest-neighbour scores need labels; observation {index} is unlabeled"
        ))
    })
}

/// For each observation, the distance to its nearest same-label neighbour
/// (other than itself) and to its nearest differently-labelled neighbour.
fn nearest_minima<D: Distance + ?Sized>(bag: &[Observation], d: &D) -> Result<Vec<(f64, f64)>> {
    let labels = bag
        .iter()
        .enumerate()
        .map(|(i, z)| label_of(z, i))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![(f64::INFINITY, f64::INFINITY); bag.len()];
    for (i, zi) in bag.iter().enumerate() {
        let (same, other) = &mut out[i];
        for (j, zj) in bag.iter().enumerate() {
            if i == j {
                continue;
            }
            let dist = d.distance(&zi.features, &zj.features);
            if labels[j] == labels[i] {
                *same = same.min(dist);
            } else {
                *other = other.min(dist);
            }
        }
    }
    Ok(out)
}

/// 1-nearest-neighbour ratio score: nearest same-label distance over nearest
/// other-label distance.
pub fn knn_ratio_score<D: Distance + ?Sized>(bag: &[Observation], d: &D) -> Result<Vec<f64>> {
    Ok(nearest_minima(bag, d)?
        .into_iter()
        .map(|(s, o)| ratio_score(s, o))
        .collect())
}

/// Like [`knn_ratio_score`] with the ratio replaced by a difference.
pub fn knn_diff_score<D: Distance + ?Sized>(bag: &[Observation], d: &D) -> Result<Vec<f64>> {
    Ok(nearest_minima(bag, d)?
        .into_iter()
        .map(|(s, o)| difference_score(s, o))
        .collect())
}

/// Median of a sorted slice with one element (at `skip`) removed.
/// Even-sized multisets use the mean of the two central order statistics.
fn median_without(sorted: &[f64], skip: usize) -> f64 {
    let m = sorted.len() - 1;
    let at = |j: usize| if j < skip { sorted[j] } else { sorted[j + 1] };
    if m % 2 == 1 {
        at(m / 2)
    } else {
        0.5 * (at(m / 2 - 1) + at(m / 2))
    }
}

/// Scores 1 when a value is at least the median of the other values, else 0.
pub fn median_ncm(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::domain("the median score needs at least two values"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("NaN in median score input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(values
        .iter()
        .map(|&z| {
            // Removing any copy of z leaves the same multiset.
            let pos = sorted.partition_point(|&s| s < z);
            if z >= median_without(&sorted, pos) {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

pub fn identity_ncm(values: &[f64]) -> Vec<f64> {
    values.to_vec()
}

fn scalar_values(bag: &[Observation]) -> Result<Vec<f64>> {
    bag.iter().map(Observation::as_scalar).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KnnRatio<D>(pub D);

impl<D: Distance> NonconformityMeasure for KnnRatio<D> {
    fn scores(&self, bag: &[Observation]) -> Result<Vec<f64>> {
        knn_ratio_score(bag, &self.0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KnnDifference<D>(pub D);

impl<D: Distance> NonconformityMeasure for KnnDifference<D> {
    fn scores(&self, bag: &[Observation]) -> Result<Vec<f64>> {
        knn_diff_score(bag, &self.0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MedianScore;

impl NonconformityMeasure for MedianScore {
    fn scores(&self, bag: &[Observation]) -> Result<Vec<f64>> {
        // The median of an empty multiset is undefined; a lone observation
        // is treated as sitting on its own median.
        if bag.len() == 1 {
            bag[0].as_scalar()?;
            return Ok(vec![1.0]);
        }
        median_ncm(&scalar_values(bag)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityScore;

impl NonconformityMeasure for IdentityScore {
    fn scores(&self, bag: &[Observation]) -> Result<Vec<f64>> {
        scalar_values(bag).map(|v| identity_ncm(&v))
    }
}
