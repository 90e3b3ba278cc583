//! The martingale that stakes everything on one binary sequence.
//!
//! Fed with identity-score conformal p-values, it multiplies its capital by
//! `n/k_n` when the `n`-th observation is 1 and the p-value is at most
//! `k_n/n`, by `n/(n − k_n)` when the observation is 0 and the p-value is at
//! least `k_n/n`, and loses everything otherwise. Starting from
//! `1/binom(N, k)` it ends with capital exactly 1 on its target.

use num_rational::Ratio;

use super::events::MAX_HORIZON;
use super::probability::binomial;
use crate::betting::{BettingFunction, BettingStrategy, PiecewiseConstant};
use crate::error::{Error, Result};
use crate::observation::Observation;
use crate::pvalues::{ConformalTransducer, IncrementalIdentity};

pub type Exact = Ratio<u128>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecklessMartingale {
    target: Vec<bool>,
    /// `ones[n]` is `k_n`, the number of ones among the first `n` target bits.
    ones: Vec<usize>,
}

/// One piece of a betting function with exact rational bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactPiece {
    pub lo: Exact,
    pub hi: Exact,
    pub height: Exact,
}

impl RecklessMartingale {
    pub fn new(target: &[bool]) -> Result<Self> {
        if target.is_empty() || target.len() > MAX_HORIZON {
            return Err(Error::domain(format!(
                "target length must lie in 1..={MAX_HORIZON}, got {}",
                target.len()
            )));
        }
        let mut ones = vec![0];
        for &b in target {
            ones.push(ones.last().unwrap() + usize::from(b));
        }
        Ok(Self { target: target.to_vec(), ones })
    }

    pub fn target(&self) -> &[bool] {
        &self.target
    }

    pub fn horizon(&self) -> usize {
        self.target.len()
    }

    /// `k`, the number of ones in the whole target.
    pub fn total_ones(&self) -> usize {
        self.ones[self.horizon()]
    }

    /// `k_n` for `n` in `0..=N`.
    pub fn ones_through(&self, n: usize) -> usize {
        self.ones[n]
    }

    pub fn initial_capital_exact(&self) -> Exact {
        Exact::new(1, binomial(self.horizon() as u64, self.total_ones() as u64))
    }

    pub fn initial_capital(&self) -> f64 {
        1.0 / binomial(self.horizon() as u64, self.total_ones() as u64) as f64
    }

    fn check_step(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.horizon() {
            return Err(Error::domain(format!(
                "step {n} outside 1..={}",
                self.horizon()
            )));
        }
        Ok(())
    }

    /// The betting function at step `n`, as exact pieces.
    pub fn exact_pieces(&self, n: usize) -> Result<Vec<ExactPiece>> {
        self.check_step(n)?;
        let k = self.ones[n] as u128;
        let nn = n as u128;
        let cut = Exact::new(k, nn);
        let zero = Exact::from_integer(0);
        let one = Exact::from_integer(1);
        Ok(if self.target[n - 1] {
            vec![
                ExactPiece { lo: zero, hi: cut, height: Exact::new(nn, k) },
                ExactPiece { lo: cut, hi: one, height: zero },
            ]
        } else {
            vec![
                ExactPiece { lo: zero, hi: cut, height: zero },
                ExactPiece { lo: cut, hi: one, height: Exact::new(nn, nn - k) },
            ]
        })
    }

    /// `∫₀¹ f_n` computed exactly from the pieces.
    pub fn exact_integral(&self, n: usize) -> Result<Exact> {
        Ok(self
            .exact_pieces(n)?
            .iter()
            .map(|p| (p.hi - p.lo) * p.height)
            .sum())
    }

    /// The betting function at step `n` in floating point. The boundary
    /// point `k_n/n` belongs to the paying piece.
    pub fn betting_function(&self, n: usize) -> Result<BettingFunction> {
        self.check_step(n)?;
        let k = self.ones[n];
        let cut = k as f64 / n as f64;
        let f = if self.target[n - 1] {
            PiecewiseConstant::new(vec![0.0, cut, 1.0], vec![n as f64 / k as f64, 0.0], false)?
        } else {
            PiecewiseConstant::new(
                vec![0.0, cut, 1.0],
                vec![0.0, n as f64 / (n - k) as f64],
                true,
            )?
        };
        Ok(BettingFunction::Piecewise(f))
    }

    /// The exact multiplier applied to p-value `p` at step `n`.
    pub fn multiplier_exact(&self, n: usize, p: f64) -> Result<Exact> {
        self.check_step(n)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("p-value {p} outside [0, 1]")));
        }
        let k = self.ones[n];
        let cut = k as f64 / n as f64;
        Ok(if self.target[n - 1] {
            if p <= cut {
                Exact::new(n as u128, k as u128)
            } else {
                Exact::from_integer(0)
            }
        } else if p >= cut {
            Exact::new(n as u128, (n - k) as u128)
        } else {
            Exact::from_integer(0)
        })
    }

    /// Exact capital after betting on `ps`, one p-value per step.
    pub fn run_exact(&self, ps: &[f64]) -> Result<Exact> {
        if ps.len() > self.horizon() {
            return Err(Error::domain("more p-values than steps"));
        }
        let mut capital = self.initial_capital_exact();
        for (i, &p) in ps.iter().enumerate() {
            capital *= self.multiplier_exact(i + 1, p)?;
        }
        Ok(capital)
    }

    /// The whole exact capital trajectory, starting from the initial capital.
    pub fn trajectory_exact(&self, ps: &[f64]) -> Result<Vec<Exact>> {
        let mut out = vec![self.initial_capital_exact()];
        for (i, &p) in ps.iter().enumerate() {
            let next = *out.last().unwrap() * self.multiplier_exact(i + 1, p)?;
            out.push(next);
        }
        Ok(out)
    }

    /// The martingale as a step-by-step betting strategy.
    pub fn strategy(&self) -> RecklessStrategy {
        RecklessStrategy { martingale: self.clone(), step: 0 }
    }
}

/// Plays a [`RecklessMartingale`] through the generic betting interface.
#[derive(Debug, Clone)]
pub struct RecklessStrategy {
    martingale: RecklessMartingale,
    step: usize,
}

impl BettingStrategy for RecklessStrategy {
    fn betting_function(&self) -> Result<BettingFunction> {
        self.martingale.betting_function(self.step + 1)
    }

    fn observe(&mut self, _p: f64) -> Result<()> {
        self.martingale.check_step(self.step + 1)?;
        self.step += 1;
        Ok(())
    }
}

/// Conformal p-values of a binary sequence under the identity score.
pub fn identity_pvalues(sequence: &[bool], seed: u64) -> Result<Vec<f64>> {
    let mut t = ConformalTransducer::new(IncrementalIdentity::new(), seed);
    sequence
        .iter()
        .map(|&b| t.step(Observation::scalar(if b { 1.0 } else { 0.0 })))
        .collect()
}
