//! Events over binary sequences of a fixed horizon.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest horizon for which events are stored exhaustively as bitsets.
pub const MAX_HORIZON: usize = 24;

/// A subset `E ⊆ {0,1}^N`, stored as a bitset over the `2^N` sequences.
///
/// Sequence `(z_1, …, z_N)` has index `Σ z_i 2^{i−1}`: bit 0 is the first
/// observation. Per-level counts `c_k = |E ∩ Ω_k|` are kept up to date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSet {
    horizon: usize,
    bits: Vec<u64>,
    level_counts: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventSetFile {
    #[serde(rename = "N")]
    n: usize,
    members: Vec<String>,
}

impl EventSet {
    pub fn empty(horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > MAX_HORIZON {
            return Err(Error::domain(format!(
                "horizon must lie in 1..={MAX_HORIZON}, got {horizon}"
            )));
        }
        let words = (1usize << horizon).div_ceil(64);
        Ok(Self { horizon, bits: vec![0; words], level_counts: vec![0; horizon + 1] })
    }

    /// All of `{0,1}^N`.
    pub fn full(horizon: usize) -> Result<Self> {
        let mut e = Self::empty(horizon)?;
        for idx in 0..1u64 << horizon {
            e.insert_index(idx);
        }
        Ok(e)
    }

    /// `Ω_k`: all sequences with exactly `k` ones.
    pub fn level(horizon: usize, k: usize) -> Result<Self> {
        let mut e = Self::empty(horizon)?;
        for idx in 0..1u64 << horizon {
            if idx.count_ones() as usize == k {
                e.insert_index(idx);
            }
        }
        Ok(e)
    }

    pub fn singleton(sequence: &[bool]) -> Result<Self> {
        let mut e = Self::empty(sequence.len())?;
        e.insert(sequence)?;
        Ok(e)
    }

    pub fn from_indices(horizon: usize, indices: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut e = Self::empty(horizon)?;
        for idx in indices {
            if idx >> horizon != 0 {
                return Err(Error::domain(format!("index {idx} out of range for N = {horizon}")));
            }
            e.insert_index(idx);
        }
        Ok(e)
    }

    pub fn from_bitstrings<S: AsRef<str>>(horizon: usize, members: &[S]) -> Result<Self> {
        let mut e = Self::empty(horizon)?;
        for m in members {
            let seq = parse_bitstring(m.as_ref())?;
            if seq.len() != horizon {
                return Err(Error::domain(format!(
                    "member {:?} has length {}, expected {horizon}",
                    m.as_ref(),
                    seq.len()
                )));
            }
            e.insert(&seq)?;
        }
        Ok(e)
    }

    /// Parses `{"N": int, "members": ["0101", …]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: EventSetFile = serde_json::from_str(text)?;
        Self::from_bitstrings(file.n, &file.members)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EventSetFile {
            n: self.horizon,
            members: self.indices().map(|i| index_to_bitstring(i, self.horizon)).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `c_k = |E ∩ Ω_k|` for `k = 0..=N`.
    pub fn level_counts(&self) -> &[u64] {
        &self.level_counts
    }

    pub fn len(&self) -> u64 {
        self.level_counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains_index(&self, idx: u64) -> bool {
        let i = idx as usize;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn contains(&self, sequence: &[bool]) -> bool {
        sequence.len() == self.horizon && self.contains_index(sequence_to_index(sequence))
    }

    pub fn insert_index(&mut self, idx: u64) -> bool {
        let i = idx as usize;
        let word = &mut self.bits[i / 64];
        let mask = 1u64 << (i % 64);
        if *word & mask != 0 {
            return false;
        }
        *word |= mask;
        self.level_counts[idx.count_ones() as usize] += 1;
        true
    }

    pub fn insert(&mut self, sequence: &[bool]) -> Result<bool> {
        if sequence.len() != self.horizon {
            return Err(Error::domain("sequence length differs from the event horizon"));
        }
        Ok(self.insert_index(sequence_to_index(sequence)))
    }

    /// Member indices in increasing order.
    pub fn indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as u64;
                rest &= rest - 1;
                Some(w as u64 * 64 + b)
            })
        })
    }

    pub fn sequences(&self) -> impl Iterator<Item = Vec<bool>> + '_ {
        self.indices().map(|i| index_to_sequence(i, self.horizon))
    }

    /// Whether the all-zero sequence is a member.
    pub fn contains_all_zero(&self) -> bool {
        self.contains_index(0)
    }

    pub fn contains_all_one(&self) -> bool {
        self.contains_index((1u64 << self.horizon) - 1)
    }
}

pub fn sequence_to_index(sequence: &[bool]) -> u64 {
    sequence
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (u64::from(b) << i))
}

pub fn index_to_sequence(idx: u64, horizon: usize) -> Vec<bool> {
    (0..horizon).map(|i| idx >> i & 1 == 1).collect()
}

pub fn parse_bitstring(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::domain(format!("invalid character {other:?} in bitstring {s:?}"))),
        })
        .collect()
}

pub fn index_to_bitstring(idx: u64, horizon: usize) -> String {
    index_to_sequence(idx, horizon)
        .into_iter()
        .map(|b| if b { '1' } else { '0' })
        .collect()
}
