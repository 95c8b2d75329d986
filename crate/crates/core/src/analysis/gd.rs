//! Gradient dominance: how much each exit's loss term steers the shared
//! backbone.
//!
//! For an objective `sum_k alpha_k * L_k`, let `g_k` be the gradient of
//! the k-th weighted term with respect to *all live backbone parameters*,
//! flattened in canonical block order. The dominance of exit `k` is the
//! cosine similarity between `g_k` and the total backbone gradient
//! `sum_j g_j`. A value near 1 means that exit effectively dictates the
//! backbone update direction; values near 0 (or negative) mean its pull
//! is drowned out or opposed.

use crate::error::Result;
use crate::multiexit::model::{Labels, MultiExitModel};
use crate::numerics::params::flatten;
use crate::numerics::tensor::Tensor;

/// Cosine similarity between each flattened gradient and the sum of all
/// of them. A zero-norm side yields 0 by convention.
pub fn dominance_from_grads(per_exit: &[Vec<f64>]) -> Vec<f64> {
    if per_exit.is_empty() {
        return Vec::new();
    }
    let dim = per_exit[0].len();
    let mut total = vec![0.0; dim];
    for g in per_exit {
        assert_eq!(g.len(), dim, "per-exit gradients must share one layout");
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    let total_norm = total.iter().map(|v| v * v).sum::<f64>().sqrt();
    per_exit
        .iter()
        .map(|g| {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || total_norm == 0.0 {
                return 0.0;
            }
            let dot: f64 = g.iter().zip(&total).map(|(a, b)| a * b).sum();
            dot / (norm * total_norm)
        })
        .collect()
}

/// Measures dominance of each participating exit on one batch: one
/// backward pass per exit, each seeded with that exit's loss weight,
/// restricted to the live backbone parameters.
pub fn gradient_dominance(
    model: &MultiExitModel,
    exits: &[usize],
    alpha: &[f64],
    x: &Tensor,
    y: &Labels,
) -> Result<Vec<f64>> {
    let backbone = model.spec.backbone_param_order();
    let mut mg = model.build_graph(exits, true)?;
    mg.graph.forward(&model.bindings(x, Some(y))?)?;
    let mut flat = Vec::with_capacity(exits.len());
    for (j, &loss) in mg.losses.iter().enumerate() {
        let grads = mg.graph.grad_weighted(&[(loss, alpha[j])], &backbone)?;
        flat.push(flatten(&grads, &backbone)?);
    }
    Ok(dominance_from_grads(&flat))
}
