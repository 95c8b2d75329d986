//! Exact inference cost accounting in FLOPs.
//!
//! A dense layer `in -> out` costs `2*in*out + out` FLOPs (multiply-adds
//! plus bias). Exiting at exit `k` pays for every backbone block up to its
//! placement **plus every head up to and including `k`**: an input routed
//! through the network evaluates each earlier head to decide whether to
//! stop there, so earlier heads are sunk cost by the time exit `k` fires.
//! The full-network cost is the cost of the last exit, making the last
//! exit's relative cost exactly 1.
//!
//! Counts are exact `u64`s; derived fractions divide them only at the
//! very end.

use super::model::{HeadShape, ModelSpec};

/// FLOPs of one dense layer.
pub fn dense_flops(in_dim: usize, out_dim: usize) -> u64 {
    2 * (in_dim as u64) * (out_dim as u64) + out_dim as u64
}

/// Per-component FLOP counts for one architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    /// FLOPs of backbone block `i+1`.
    pub block_flops: Vec<u64>,
    /// FLOPs of the head at exit `k+1`.
    pub head_flops: Vec<u64>,
    /// Placement of exit `k+1` (copied from the spec).
    pub placements: Vec<usize>,
    /// Cost of running the whole network, i.e. of the last exit.
    pub backbone_cost: u64,
}

/// Tallies the cost model for a spec. ReLU is not counted; costs are
/// dominated by the dense layers and the comparison is unaffected by a
/// uniform per-activation constant.
pub fn cost_model(spec: &ModelSpec) -> CostModel {
    let block_flops: Vec<u64> = (1..=spec.blocks)
        .map(|i| dense_flops(spec.block_in_dim(i), spec.hidden_dim))
        .collect();
    let out = spec.task.output_dim();
    let per_head = match spec.head {
        HeadShape::Linear => dense_flops(spec.hidden_dim, out),
        HeadShape::TwoLayer { hidden } => {
            dense_flops(spec.hidden_dim, hidden) + dense_flops(hidden, out)
        }
    };
    let head_flops = vec![per_head; spec.num_exits()];
    let mut cm = CostModel {
        block_flops,
        head_flops,
        placements: spec.placements.clone(),
        backbone_cost: 0,
    };
    cm.backbone_cost = cm.exit_cost(spec.num_exits());
    cm
}

impl CostModel {
    /// Exact FLOPs paid when a sample leaves at exit `k` (1-based):
    /// blocks up to the exit's placement plus heads `1..=k`.
    pub fn exit_cost(&self, k: usize) -> u64 {
        let p = self.placements[k - 1];
        let blocks: u64 = self.block_flops[..p].iter().sum();
        let heads: u64 = self.head_flops[..k].iter().sum();
        blocks + heads
    }

    /// Exit cost relative to running the full network.
    pub fn cost_fraction(&self, k: usize) -> f64 {
        self.exit_cost(k) as f64 / self.backbone_cost as f64
    }

    pub fn num_exits(&self) -> usize {
        self.placements.len()
    }
}
