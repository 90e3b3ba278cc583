//! Betting functions, betting strategies and the martingales they generate.
//!
//! A betting function is a density on `[0, 1]`; betting with `f` on a
//! p-value `p` multiplies the capital by `f(p)`. A strategy picks the next
//! betting function from past p-values only, which makes the running product
//! a betting martingale. Capital is tracked as a natural logarithm so that
//! values far outside the `f64` range stay exact on the log scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::Observation;
use crate::pvalues::{ConformalTransducer, OnlineScorer};

/// A piecewise-constant density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    edges: Vec<f64>,
    heights: Vec<f64>,
    ties_to_right: bool,
}

impl PiecewiseConstant {
    /// `edges` must start at 0, end at 1 and be non-decreasing; piece `i`
    /// spans `edges[i]..edges[i + 1]` with height `heights[i]`. A point lying
    /// exactly on an interior edge takes the height of the piece on its right
    /// when `ties_to_right`, otherwise of the piece on its left.
    pub fn new(edges: Vec<f64>, heights: Vec<f64>, ties_to_right: bool) -> Result<Self> {
        if edges.len() != heights.len() + 1 || heights.is_empty() {
            return Err(Error::domain("piecewise density needs one more edge than heights"));
        }
        if edges[0] != 0.0 || *edges.last().unwrap() != 1.0 {
            return Err(Error::domain("piecewise density must cover exactly [0, 1]"));
        }
        if edges.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("piecewise density edges must be non-decreasing"));
        }
        if heights.iter().any(|h| !(*h >= 0.0)) {
            return Err(Error::domain("piecewise density heights must be nonnegative"));
        }
        Ok(Self { edges, heights, ties_to_right })
    }

    /// `B` equal-width bins; points on interior edges go to the right bin,
    /// and the last bin is closed on the right.
    pub fn equal_bins(heights: Vec<f64>) -> Result<Self> {
        let b = heights.len();
        let edges = (0..=b).map(|i| i as f64 / b as f64).collect();
        Self::new(edges, heights, true)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn eval(&self, u: f64) -> f64 {
        let interior = &self.edges[1..self.edges.len() - 1];
        let piece = if self.ties_to_right {
            interior.partition_point(|&e| e <= u)
        } else {
            interior.partition_point(|&e| e < u)
        };
        self.heights[piece]
    }

    /// Exact integral: the sum of width × height.
    pub fn integral(&self) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.heights)
            .map(|(w, h)| (w[1] - w[0]) * h)
            .sum()
    }
}

/// A betting function `f : [0, 1] → [0, ∞]` with `∫₀¹ f = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum BettingFunction {
    /// `f ≡ 1`: no bet.
    Uniform,
    /// `u ↦ κ u^{κ−1}`, which bets on small p-values.
    Power { kappa: f64 },
    /// `Σ_j w_j κ_j u^{κ_j−1}` with weights summing to one, stored as logs.
    PowerMixture { kappas: Vec<f64>, log_weights: Vec<f64> },
    Piecewise(PiecewiseConstant),
}

pub fn power_betting_function(kappa: f64) -> Result<BettingFunction> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    Ok(BettingFunction::Power { kappa })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl BettingFunction {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            BettingFunction::Uniform => 1.0,
            BettingFunction::Power { kappa } => kappa * u.powf(kappa - 1.0),
            BettingFunction::PowerMixture { .. } => self.ln_eval(u).exp(),
            BettingFunction::Piecewise(p) => p.eval(u),
        }
    }

    /// `ln f(u)`, computed without forming `f(u)` where that could overflow.
    pub fn ln_eval(&self, u: f64) -> f64 {
        match self {
            BettingFunction::Uniform => 0.0,
            BettingFunction::Power { kappa } => kappa.ln() + (kappa - 1.0) * u.ln(),
            BettingFunction::PowerMixture { kappas, log_weights } => {
                let ln_u = u.ln();
                log_sum_exp(
                    kappas
                        .iter()
                        .zip(log_weights)
                        .map(move |(k, w)| w + k.ln() + (k - 1.0) * ln_u),
                )
            }
            BettingFunction::Piecewise(p) => p.eval(u).ln(),
        }
    }

    /// `∫₀¹ f`, evaluated in closed form.
    pub fn integral(&self) -> f64 {
        match self {
            BettingFunction::Uniform | BettingFunction::Power { .. } => 1.0,
            BettingFunction::PowerMixture { log_weights, .. } => {
                log_weights.iter().map(|w| w.exp()).sum()
            }
            BettingFunction::Piecewise(p) => p.integral(),
        }
    }
}

/// Capital of a betting martingale after `step` p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleState {
    pub step: usize,
    /// Natural log of the capital; `-∞` once the capital hits zero.
    pub ln_capital: f64,
}

impl MartingaleState {
    pub fn new(initial_capital: f64) -> Result<Self> {
        if !(initial_capital > 0.0 && initial_capital.is_finite()) {
            return Err(Error::domain("initial capital must be positive and finite"));
        }
        Ok(Self { step: 0, ln_capital: initial_capital.ln() })
    }

    pub fn unit() -> Self {
        Self { step: 0, ln_capital: 0.0 }
    }

    /// Raw capital; `+∞` when it exceeds the `f64` range.
    pub fn capital(&self) -> f64 {
        self.ln_capital.exp()
    }

    pub fn log10_capital(&self) -> f64 {
        self.ln_capital / std::f64::consts::LN_10
    }

    /// Multiplies the capital by `exp(ln_multiplier)`. Zero and infinite
    /// capital are absorbing.
    fn advance(&mut self, ln_multiplier: f64) {
        self.step += 1;
        if self.ln_capital.is_infinite() {
            return;
        }
        self.ln_capital += ln_multiplier;
    }
}

/// Chooses betting functions predictably: the function for step `n` is
/// requested before `p_n` is revealed through [`observe`](Self::observe).
pub trait BettingStrategy: Send {
    fn betting_function(&self) -> Result<BettingFunction>;

    fn observe(&mut self, p: f64) -> Result<()>;

    /// `ln f_n(p)` for the current betting function.
    fn ln_multiplier(&self, p: f64) -> Result<f64> {
        Ok(self.betting_function()?.ln_eval(p))
    }
}

impl BettingStrategy for Box<dyn BettingStrategy> {
    fn betting_function(&self) -> Result<BettingFunction> {
        (**self).betting_function()
    }
    fn observe(&mut self, p: f64) -> Result<()> {
        (**self).observe(p)
    }
    fn ln_multiplier(&self, p: f64) -> Result<f64> {
        (**self).ln_multiplier(p)
    }
}

/// Bets the same function at every step.
#[derive(Debug, Clone)]
pub struct FixedBet(pub BettingFunction);

impl BettingStrategy for FixedBet {
    fn betting_function(&self) -> Result<BettingFunction> {
        Ok(self.0.clone())
    }

    fn observe(&mut self, _p: f64) -> Result<()> {
        Ok(())
    }

    fn ln_multiplier(&self, p: f64) -> Result<f64> {
        Ok(self.0.ln_eval(p))
    }
}

/// The simple mixture `∫₀¹ S^{(κ)} dκ`, discretised with the midpoint rule
/// on `m` nodes `κ_j = (j − ½)/m`.
///
/// Viewed as a single strategy it bets, at each step, the mixture of power
/// functions weighted by the current capital of each node.
#[derive(Debug, Clone)]
pub struct SimpleMixture {
    kappas: Vec<f64>,
    ln_capitals: Vec<f64>,
}

impl SimpleMixture {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::domain("simple mixture needs at least two quadrature nodes"));
        }
        let m = nodes as f64;
        Ok(Self {
            kappas: (1..=nodes).map(|j| (j as f64 - 0.5) / m).collect(),
            ln_capitals: vec![0.0; nodes],
        })
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    /// ln of the average capital over the nodes.
    pub fn ln_capital(&self) -> f64 {
        log_sum_exp(self.ln_capitals.iter().copied()) - (self.kappas.len() as f64).ln()
    }

    fn log_weights(&self) -> Vec<f64> {
        let total = log_sum_exp(self.ln_capitals.iter().copied());
        self.ln_capitals.iter().map(|c| c - total).collect()
    }
}

impl BettingStrategy for SimpleMixture {
    fn betting_function(&self) -> Result<BettingFunction> {
        Ok(BettingFunction::PowerMixture {
            kappas: self.kappas.clone(),
            log_weights: self.log_weights(),
        })
    }

    fn observe(&mut self, p: f64) -> Result<()> {
        let ln_p = p.ln();
        for (c, k) in self.ln_capitals.iter_mut().zip(&self.kappas) {
            *c += k.ln() + (k - 1.0) * ln_p;
        }
        Ok(())
    }
}

/// Histogram betting: `B` equal bins over `[0, 1]`, each seeded with `C`
/// pseudo-p-values. The bet on bin `i` is `(C + n_i) / (C + n/B)`, where `n_i`
/// counts the past p-values in that bin and `n` all past p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBettor {
    pseudo_count: f64,
    counts: Vec<u64>,
    n: u64,
}

impl HistogramBettor {
    pub fn new(bins: usize, pseudo_count: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        if !(pseudo_count >= 0.0 && pseudo_count.is_finite()) {
            return Err(Error::domain("pseudo-count must be finite and nonnegative"));
        }
        Ok(Self { pseudo_count, counts: vec![0; bins], n: 0 })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    fn bin_of(&self, p: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("p-value {p} outside [0, 1]")));
        }
        let b = self.counts.len();
        Ok(((p * b as f64) as usize).min(b - 1))
    }

    /// The current betting function.
    pub fn bet(&self) -> Result<BettingFunction> {
        let b = self.counts.len() as f64;
        let norm = self.pseudo_count + self.n as f64 / b;
        if norm == 0.0 {
            return Err(Error::domain(
                "histogram bet undefined with zero pseudo-count before any p-value",
            ));
        }
        let heights = self
            .counts
            .iter()
            .map(|&c| (self.pseudo_count + c as f64) / norm)
            .collect();
        Ok(BettingFunction::Piecewise(PiecewiseConstant::equal_bins(heights)?))
    }

    /// Files `p` into its bin.
    pub fn update(&mut self, p: f64) -> Result<()> {
        let i = self.bin_of(p)?;
        self.counts[i] += 1;
        self.n += 1;
        Ok(())
    }
}

impl BettingStrategy for HistogramBettor {
    fn betting_function(&self) -> Result<BettingFunction> {
        self.bet()
    }

    fn observe(&mut self, p: f64) -> Result<()> {
        self.update(p)
    }

    fn ln_multiplier(&self, p: f64) -> Result<f64> {
        let b = self.counts.len() as f64;
        let norm = self.pseudo_count + self.n as f64 / b;
        if norm == 0.0 {
            return Err(Error::domain(
                "histogram bet undefined with zero pseudo-count before any p-value",
            ));
        }
        let i = self.bin_of(p)?;
        Ok(((self.pseudo_count + self.counts[i] as f64) / norm).ln())
    }
}

/// Parsed form of the built-in strategies, as written on the command line:
/// `power:κ`, `mixture:m` or `histogram:B,C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StrategyConfig {
    Power { kappa: f64 },
    Mixture { nodes: usize },
    Histogram { bins: usize, pseudo_count: f64 },
}

impl StrategyConfig {
    pub fn build(&self) -> Result<Box<dyn BettingStrategy>> {
        Ok(match *self {
            StrategyConfig::Power { kappa } => Box::new(FixedBet(power_betting_function(kappa)?)),
            StrategyConfig::Mixture { nodes } => Box::new(SimpleMixture::new(nodes)?),
            StrategyConfig::Histogram { bins, pseudo_count } => {
                Box::new(HistogramBettor::new(bins, pseudo_count)?)
            }
        })
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyConfig::Power { kappa } => write!(f, "power:{kappa}"),
            StrategyConfig::Mixture { nodes } => write!(f, "mixture:{nodes}"),
            StrategyConfig::Histogram { bins, pseudo_count } => {
                write!(f, "histogram:{bins},{pseudo_count}")
            }
        }
    }
}

impl FromStr for StrategyConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("cannot parse strategy {s:?}; expected power:K, mixture:M or histogram:B,C"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let config = match name.trim() {
            "power" => StrategyConfig::Power { kappa: args.trim().parse().map_err(|_| bad())? },
            "mixture" => StrategyConfig::Mixture { nodes: args.trim().parse().map_err(|_| bad())? },
            "histogram" => {
                let (b, c) = args.split_once(',').ok_or_else(bad)?;
                StrategyConfig::Histogram {
                    bins: b.trim().parse().map_err(|_| bad())?,
                    pseudo_count: c.trim().parse().map_err(|_| bad())?,
                }
            }
            _ => return Err(bad()),
        };
        config.build()?;
        Ok(config)
    }
}

/// A betting martingale over a p-value stream.
pub struct BettingMartingale<B> {
    strategy: B,
    state: MartingaleState,
}

impl<B: BettingStrategy> BettingMartingale<B> {
    pub fn new(strategy: B) -> Self {
        Self { strategy, state: MartingaleState::unit() }
    }

    pub fn with_initial(strategy: B, initial_capital: f64) -> Result<Self> {
        Ok(Self { strategy, state: MartingaleState::new(initial_capital)? })
    }

    pub fn state(&self) -> MartingaleState {
        self.state
    }

    pub fn strategy(&self) -> &B {
        &self.strategy
    }

    /// Bets on `p` and returns the new state together with `ln f_n(p)`.
    pub fn feed(&mut self, p: f64) -> Result<(MartingaleState, f64)> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("p-value {p} outside [0, 1]")));
        }
        let step = self.state.step + 1;
        let ln_f = if self.state.ln_capital == f64::NEG_INFINITY {
            // Zero capital bets nothing from here on.
            f64::NEG_INFINITY
        } else {
            let v = self.strategy.ln_multiplier(p)?;
            if v.is_nan() {
                return Err(Error::BettingFault {
                    step,
                    reason: format!("betting function is NaN at p = {p}"),
                });
            }
            v
        };
        self.state.advance(ln_f);
        self.strategy.observe(p)?;
        Ok((self.state, ln_f))
    }
}

/// Runs a strategy over a p-value sequence; the trajectory starts with `S₀ = 1`.
pub fn product_martingale<B: BettingStrategy>(
    strategy: B,
    ps: impl IntoIterator<Item = f64>,
) -> Result<Vec<MartingaleState>> {
    let mut m = BettingMartingale::new(strategy);
    let mut out = vec![m.state()];
    for p in ps {
        out.push(m.feed(p)?.0);
    }
    Ok(out)
}

/// The simple mixture computed directly as the average of `m` parallel power
/// martingales; trajectory starts with `S₀ = 1`.
pub fn simple_mixture(
    ps: impl IntoIterator<Item = f64>,
    nodes: usize,
) -> Result<Vec<MartingaleState>> {
    let mut mix = SimpleMixture::new(nodes)?;
    let mut out = vec![MartingaleState::unit()];
    for (i, p) in ps.into_iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("p-value {p} outside [0, 1]")));
        }
        mix.observe(p)?;
        out.push(MartingaleState { step: i + 1, ln_capital: mix.ln_capital() });
    }
    Ok(out)
}

/// One step of a conformal martingale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStep {
    pub n: usize,
    pub p: f64,
    pub state: MartingaleState,
    /// `ln(S_n / S_{n−1})`, the log of the betting function's value.
    pub ln_ratio: f64,
}

/// A betting martingale fed with conformal p-values.
pub struct ConformalMartingale<S, B> {
    transducer: ConformalTransducer<S>,
    martingale: BettingMartingale<B>,
}

impl<S: OnlineScorer, B: BettingStrategy> ConformalMartingale<S, B> {
    pub fn new(transducer: ConformalTransducer<S>, strategy: B) -> Self {
        Self { transducer, martingale: BettingMartingale::new(strategy) }
    }

    pub fn state(&self) -> MartingaleState {
        self.martingale.state()
    }

    pub fn step(&mut self, z: Observation) -> Result<RunStep> {
        let p = self.transducer.step(z)?;
        let (state, ln_ratio) = self.martingale.feed(p)?;
        Ok(RunStep { n: state.step, p, state, ln_ratio })
    }
}

/// Feeds a whole stream through a transducer and strategy.
pub fn conformal_martingale_run<S: OnlineScorer, B: BettingStrategy>(
    transducer: ConformalTransducer<S>,
    strategy: B,
    stream: impl IntoIterator<Item = Observation>,
) -> Result<Vec<RunStep>> {
    let mut cm = ConformalMartingale::new(transducer, strategy);
    stream.into_iter().map(|z| cm.step(z)).collect()
}
