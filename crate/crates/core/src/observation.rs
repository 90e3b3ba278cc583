//! The unit of streamed data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single observation: a feature vector with an optional categorical label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub features: Vec<f64>,
    pub label: Option<u32>,
}

impl Observation {
    pub fn new(features: Vec<f64>, label: Option<u32>) -> Self {
        Self { features, label }
    }

    pub fn labeled(features: Vec<f64>, label: u32) -> Self {
        Self::new(features, Some(label))
    }

    /// A one-dimensional unlabeled observation.
    pub fn scalar(value: f64) -> Self {
        Self::new(vec![value], None)
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// The value of a one-dimensional observation.
    pub fn as_scalar(&self) -> Result<f64> {
        match self.features.as_slice() {
            [x] => Ok(*x),
            other => Err(Error::Incompatible(format!(
                "expected a scalar observation, found dimension {}",
                other.len()
            ))),
        }
    }

    /// Checks that `self` may join a stream whose first element is `reference`.
    pub fn check_compatible(&self, reference: &Observation) -> Result<()> {
        if self.dim() != reference.dim() {
            return Err(Error::Incompatible(format!(
                "feature dimension {} differs from stream dimension {}",
                self.dim(),
                reference.dim()
            )));
        }
        if self.label.is_some() != reference.label.is_some() {
            return Err(Error::Incompatible(
                "labels must be present for all or none of a stream's observations".into(),
            ));
        }
        Ok(())
    }
}

/// Validates the stream-level invariants: constant dimension and all-or-none labels.
pub fn check_stream(stream: &[Observation]) -> Result<()> {
    if let Some(first) = stream.first() {
        for z in &stream[1..] {
            z.check_compatible(first)?;
        }
    }
    Ok(())
}

pub fn scalars(values: impl IntoIterator<Item = f64>) -> Vec<Observation> {
    values.into_iter().map(Observation::scalar).collect()
}
