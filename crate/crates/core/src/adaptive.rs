//! Adaptive learning rate driven by the deviation of the current peak score
//! from its recent history.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Recent peak scores plus the constants of the update rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistory {
    window: VecDeque<f64>,
    capacity: usize,
    pub tau: f64,
    pub eta_base: f64,
}

impl ScoreHistory {
    pub fn new(capacity: usize, tau: f64, eta_base: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("history window must hold at least one score"));
        }
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if !(eta_base > 0.0 && eta_base < 1.0) {
            return Err(Error::invalid(format!("eta_base must lie in (0, 1), got {eta_base}")));
        }
        Ok(ScoreHistory {
            window: VecDeque::with_capacity(capacity + 1),
            capacity,
            tau,
            eta_base,
        })
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append a score, evicting the oldest beyond capacity.
    pub fn push(&mut self, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::invalid(format!("score history only holds finite values, got {score}")));
        }
        self.window.push_back(score);
        while self.window.len() > self.capacity {
            self.window.pop_front();
        }
        Ok(())
    }

    /// Deviation of `current` from the mean of the window with `current` included.
    pub fn confidence(&self, current: f64) -> f64 {
        confidence(self, current)
    }
}

pub fn confidence(history: &ScoreHistory, current: f64) -> f64 {
    if history.window.is_empty() {
        return 0.0;
    }
    let n = history.window.len() as f64 + 1.0;
    let mean = (history.window.iter().sum::<f64>() + current) / n;
    current - mean
}

/// Piecewise rule: full base rate above `tau`, frozen below `-tau`,
/// `eta_base * (1 + c)` in between. Note the jump at `c = tau`.
pub fn learning_rate(c: f64, tau: f64, eta_base: f64) -> f64 {
    if c > tau {
        eta_base
    } else if c < -tau {
        0.0
    } else {
        eta_base * (1.0 + c)
    }
}
