//! Multistage alarms driven by a positive martingale: conformal CUSUM and
//! Shiryaev–Roberts.
//!
//! Both procedures only need the one-step ratios `S_n / S_{n−1}`. After an
//! alarm at time `τ_{k−1}` the statistics restart, and the next alarm is the
//! first `n > τ_{k−1}` with
//!
//! * CUSUM: `max_{τ_{k−1} ≤ i < n} S_n / S_i ≥ c`, kept as
//!   `W_n = (S_n / S_{n−1}) · max(W_{n−1}, 1)`, `W = 0` after a reset;
//! * Shiryaev–Roberts: `Σ_{τ_{k−1} ≤ i < n} S_n / S_i ≥ c`, kept as
//!   `R_n = (S_n / S_{n−1}) · (R_{n−1} + 1)`, `R = 0` after a reset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Cusum,
    ShiryaevRoberts,
}

impl std::str::FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cusum" => Ok(Procedure::Cusum),
            "sr" | "shiryaev-roberts" | "shiryaev_roberts" => Ok(Procedure::ShiryaevRoberts),
            _ => Err(Error::domain(format!("unknown procedure {s:?}; expected cusum or sr"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    procedure: Procedure,
    threshold: f64,
    statistic: f64,
    /// Statistic at the latest step, before any reset.
    peak: f64,
    step: usize,
    alarms: Vec<usize>,
}

impl DetectorState {
    pub fn new(procedure: Procedure, threshold: f64) -> Result<Self> {
        if !(threshold > 1.0) || threshold.is_nan() {
            return Err(Error::domain(format!("threshold must exceed 1, got {threshold}")));
        }
        Ok(Self { procedure, threshold, statistic: 0.0, peak: 0.0, step: 0, alarms: Vec::new() })
    }

    pub fn cusum(threshold: f64) -> Result<Self> {
        Self::new(Procedure::Cusum, threshold)
    }

    pub fn shiryaev_roberts(threshold: f64) -> Result<Self> {
        Self::new(Procedure::ShiryaevRoberts, threshold)
    }

    pub fn procedure(&self) -> Procedure {
        self.procedure
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Current `W_n` (CUSUM) or `R_n` (Shiryaev–Roberts); 0 right after an alarm.
    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    /// Statistic computed at the latest step; unlike [`statistic`](Self::statistic)
    /// it keeps the value that crossed the threshold on an alarm step.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Number of ratios consumed.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn alarms(&self) -> &[usize] {
        &self.alarms
    }

    pub fn last_alarm(&self) -> usize {
        self.alarms.last().copied().unwrap_or(0)
    }

    /// Consumes `S_n / S_{n−1}` and reports whether step `n` raises an alarm.
    pub fn step_ratio(&mut self, ratio: f64) -> Result<bool> {
        if !(ratio > 0.0) {
            return Err(Error::domain(format!(
                "martingale ratio must be positive, got {ratio} at step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        self.statistic = match self.procedure {
            Procedure::Cusum => ratio * self.statistic.max(1.0),
            Procedure::ShiryaevRoberts => ratio * (self.statistic + 1.0),
        };
        self.peak = self.statistic;
        let alarm = self.statistic >= self.threshold;
        if alarm {
            self.alarms.push(self.step);
            self.statistic = 0.0;
        }
        Ok(alarm)
    }

    /// Consumes consecutive capital values `S_{n−1}` and `S_n`.
    pub fn step_capital(&mut self, s_prev: f64, s_cur: f64) -> Result<bool> {
        if !(s_prev > 0.0 && s_cur > 0.0) || s_prev.is_infinite() || s_cur.is_infinite() {
            return Err(Error::domain(format!(
                "capital must be positive and finite, got {s_prev} -> {s_cur}"
            )));
        }
        self.step_ratio(s_cur / s_prev)
    }

    /// Consumes `ln(S_n / S_{n−1})`, as produced by log-space martingales.
    pub fn step_ln_ratio(&mut self, ln_ratio: f64) -> Result<bool> {
        if ln_ratio.is_nan() || ln_ratio == f64::NEG_INFINITY {
            return Err(Error::domain(format!(
                "martingale ratio must be positive at step {}",
                self.step + 1
            )));
        }
        self.step_ratio(ln_ratio.exp())
    }

    pub fn alarm_frequency(&self) -> Result<f64> {
        alarm_frequency(&self.alarms, self.step)
    }
}

/// Functional form of one CUSUM step.
pub fn cusum_step(mut d: DetectorState, s_prev: f64, s_cur: f64) -> Result<(DetectorState, bool)> {
    if d.procedure != Procedure::Cusum {
        return Err(Error::domain("cusum_step on a Shiryaev-Roberts detector"));
    }
    let alarm = d.step_capital(s_prev, s_cur)?;
    Ok((d, alarm))
}

/// Functional form of one Shiryaev–Roberts step.
pub fn sr_step(mut d: DetectorState, s_prev: f64, s_cur: f64) -> Result<(DetectorState, bool)> {
    if d.procedure != Procedure::ShiryaevRoberts {
        return Err(Error::domain("sr_step on a CUSUM detector"));
    }
    let alarm = d.step_capital(s_prev, s_cur)?;
    Ok((d, alarm))
}

/// `A_n / n`, where `A_n` counts the alarms raised at or before step `n`.
pub fn alarm_frequency(alarms: &[usize], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("alarm frequency needs n >= 1"));
    }
    Ok(alarms.iter().filter(|&&t| t <= n).count() as f64 / n as f64)
}

/// Runs a detector over a capital trajectory `S_0, S_1, …` and returns the alarm times.
pub fn alarms_for_trajectory(procedure: Procedure, threshold: f64, capital: &[f64]) -> Result<Vec<usize>> {
    let mut d = DetectorState::new(procedure, threshold)?;
    for w in capital.windows(2) {
        d.step_capital(w[0], w[1])?;
    }
    Ok(d.alarms)
}
