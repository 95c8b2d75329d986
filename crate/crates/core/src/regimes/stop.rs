//! Multi-exit early stopping.
//!
//! A training phase keeps going as long as *any* tracked exit is still
//! setting a new personal best on the validation set; it stops after
//! `patience` consecutive epochs in which none of them improved. Each
//! exit keeps its own best, so a late exit plateauing never silences an
//! early exit that is still learning.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EarlyStopState {
    patience: usize,
    higher_is_better: bool,
    best: Vec<f64>,
    stale: usize,
}

impl EarlyStopState {
    /// Tracks `tracked` exits with the given patience (must be >= 1).
    /// `higher_is_better` selects the improvement direction (true for
    /// accuracy, false for loss-like metrics).
    pub fn new(tracked: usize, patience: usize, higher_is_better: bool) -> Result<Self> {
        if patience == 0 {
            return Err(Error::InvalidParameter("early-stop patience must be >= 1".into()));
        }
        if tracked == 0 {
            return Err(Error::InvalidParameter("early stopping needs at least one exit".into()));
        }
        let worst = if higher_is_better { f64::NEG_INFINITY } else { f64::INFINITY };
        Ok(EarlyStopState {
            patience,
            higher_is_better,
            best: vec![worst; tracked],
            stale: 0,
        })
    }

    /// Feeds one epoch of per-exit metrics; returns true when training
    /// should stop. Only strict improvement counts.
    pub fn update(&mut self, metrics: &[f64]) -> Result<bool> {
        if metrics.len() != self.best.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} metrics for {} tracked exits",
                metrics.len(),
                self.best.len()
            )));
        }
        let mut improved = false;
        for (best, &m) in self.best.iter_mut().zip(metrics) {
            let better = if self.higher_is_better { m > *best } else { m < *best };
            if better {
                *best = m;
                improved = true;
            }
        }
        if improved {
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        Ok(self.stale >= self.patience)
    }

    /// Consecutive epochs without any improvement.
    pub fn stale_epochs(&self) -> usize {
        self.stale
    }

    /// Best metric seen per tracked exit.
    pub fn best(&self) -> &[f64] {
        &self.best
    }
}
