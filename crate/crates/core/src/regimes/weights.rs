//! Per-exit loss weights and the gradient-rebalancing combiner.
//!
//! Every weighting is normalized so the K weights sum to K; the uniform
//! scheme is then exactly all-ones, and totals stay comparable across
//! schemes. `inc` grows linearly with exit index, `dec` mirrors it, and
//! `sdn` weights each exit by its relative inference cost (cheap exits
//! get small weights, the last exit the largest).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiexit::cost::CostModel;
use crate::multiexit::model::ModelSpec;
use crate::numerics::params::Params;
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    Uniform,
    /// Linearly increasing with exit index: `alpha_k = 2k / (K+1)`.
    Inc,
    /// Linearly decreasing: `alpha_k = 2(K+1-k) / (K+1)`.
    Dec,
    /// Proportional to each exit's relative FLOP cost ("sdn" in configs).
    Sdn,
}

impl FromStr for LossWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(LossWeighting::Uniform),
            "inc" => Ok(LossWeighting::Inc),
            "dec" => Ok(LossWeighting::Dec),
            "sdn" => Ok(LossWeighting::Sdn),
            _ => Err(Error::InvalidParameter(format!(
                "unknown loss weighting {s:?} (expected uniform, inc, dec, or sdn)"
            ))),
        }
    }
}

/// Weight vector for all K exits, normalized to sum to K.
pub fn loss_weights(weighting: LossWeighting, cm: &CostModel) -> Vec<f64> {
    let k = cm.num_exits();
    let raw: Vec<f64> = match weighting {
        LossWeighting::Uniform => vec![1.0; k],
        LossWeighting::Inc => (1..=k).map(|i| i as f64).collect(),
        LossWeighting::Dec => (1..=k).map(|i| (k + 1 - i) as f64).collect(),
        LossWeighting::Sdn => (1..=k).map(|i| cm.exit_cost(i) as f64).collect(),
    };
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w * k as f64 / sum).collect()
}

/// Combines per-exit gradients by rebalancing instead of weighting: each
/// backbone block's gradient becomes the *mean* over the exits whose
/// forward path runs through that block, so deep and shallow exits pull
/// on shared blocks with equal say regardless of how many exits sit
/// behind them. Head gradients pass through untouched (each head belongs
/// to exactly one exit). Blocks no participating exit reaches get zeros.
///
/// `per_exit[j]` must hold the gradients of exit `exits[j]`'s unweighted
/// loss for every name in `trainable`.
pub fn ge_combine(
    spec: &ModelSpec,
    exits: &[usize],
    per_exit: &[Params],
    trainable: &[String],
) -> Result<Params> {
    if exits.len() != per_exit.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} exits but {} gradient sets",
            exits.len(),
            per_exit.len()
        )));
    }
    let mut combined = Params::new();
    for name in trainable {
        let block = name
            .strip_prefix("block")
            .and_then(|rest| rest.split('.').next())
            .and_then(|num| num.parse::<usize>().ok());
        let tensor = match block {
            Some(b) => {
                // Exits reached through block b: placement >= b.
                let through: Vec<usize> = (0..exits.len())
                    .filter(|&j| spec.placements[exits[j] - 1] >= b)
                    .collect();
                let template = per_exit[0]
                    .get(name)
                    .ok_or_else(|| Error::UnknownParam(name.clone()))?;
                let mut acc = Tensor::zeros(template.shape());
                for &j in &through {
                    let g = per_exit[j]
                        .get(name)
                        .ok_or_else(|| Error::UnknownParam(name.clone()))?;
                    acc.axpy(1.0, g);
                }
                if !through.is_empty() {
                    acc.scale(1.0 / through.len() as f64);
                }
                acc
            }
            None => {
                // Head parameter: sum across exits (only the owning
                // exit's term is nonzero).
                let template = per_exit[0]
                    .get(name)
                    .ok_or_else(|| Error::UnknownParam(name.clone()))?;
                let mut acc = Tensor::zeros(template.shape());
                for grads in per_exit {
                    let g = grads
                        .get(name)
                        .ok_or_else(|| Error::UnknownParam(name.clone()))?;
                    acc.axpy(1.0, g);
                }
                acc
            }
        };
        combined.insert(name.clone(), tensor);
    }
    Ok(combined)
}
