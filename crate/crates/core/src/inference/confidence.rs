//! Per-row confidence scores for classification logits.
//!
//! Both criteria map a logit row to [0, 1] with higher meaning more
//! confident: `max_prob` is the largest softmax probability, and
//! `norm_entropy` is one minus the softmax entropy normalized by its
//! maximum (log C), so the uniform distribution scores 0 and a one-hot
//! distribution scores 1.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MaxProb,
    NormEntropy,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_prob" => Ok(Criterion::MaxProb),
            "norm_entropy" => Ok(Criterion::NormEntropy),
            _ => Err(Error::UnsupportedCriterion(format!(
                "{s:?} (expected max_prob or norm_entropy)"
            ))),
        }
    }
}

/// Numerically stable softmax of one logit row.
pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// Confidence of one classification logit row under the criterion.
pub fn confidence(row: &[f64], criterion: Criterion) -> f64 {
    let probs = softmax_row(row);
    match criterion {
        Criterion::MaxProb => probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Criterion::NormEntropy => {
            // Entropy in nats; p log p -> 0 as p -> 0.
            let h: f64 = probs
                .iter()
                .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
                .sum();
            1.0 - h / (probs.len() as f64).ln()
        }
    }
}
