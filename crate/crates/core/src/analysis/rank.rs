//! Numerical rank of per-block activation matrices.
//!
//! The effective dimensionality of a block's representation is the number
//! of singular values above a relative tolerance. Collapsing ranks along
//! depth are one signature of over-compressed representations in front of
//! early exits.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::multiexit::MultiExitModel;
use crate::numerics::tensor::Tensor;

/// Default relative tolerance: singular values below `1e-3 * sigma_max`
/// count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-3;

/// Number of singular values exceeding `rel_tol * max(singular values)`.
/// A zero (or empty) spectrum has rank 0. `sigma` need not be sorted.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    let max = sigma.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let cut = rel_tol * max;
    sigma.iter().filter(|&&s| s > cut).count()
}

/// Rank of one block's `[n, hidden]` activation matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRank {
    /// Backbone block index (1-based).
    pub block: usize,
    /// Numerical rank of the activation matrix.
    pub rank: usize,
    /// Matrix dimensions the rank was measured on (samples, units).
    pub samples: usize,
    pub units: usize,
}

/// Per-block numerical ranks for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile {
    pub per_block: Vec<BlockRank>,
    pub rel_tol: f64,
}

/// Singular values of a dense matrix, in nalgebra's descending order.
pub fn singular_values(m: &Tensor) -> Vec<f64> {
    let mat = DMatrix::from_row_slice(m.rows(), m.cols(), m.data());
    mat.singular_values().iter().cloned().collect()
}

/// Ranks of every live block's post-activation matrix on the batch `x`,
/// using [`numerical_rank`] with the given relative tolerance. The result
/// is invariant to sample order and monotonically non-increasing in
/// `rel_tol`.
pub fn rank_profile(model: &MultiExitModel, x: &Tensor, rel_tol: f64) -> Result<RankProfile> {
    if !(rel_tol.is_finite() && rel_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rank tolerance must be finite and non-negative, got {rel_tol}"
        )));
    }
    let out = model.forward_all(x, true)?;
    let per_block = out
        .activations
        .iter()
        .enumerate()
        .map(|(i, act)| BlockRank {
            block: i + 1,
            rank: numerical_rank(&singular_values(act), rel_tol),
            samples: act.rows(),
            units: act.cols(),
        })
        .collect();
    Ok(RankProfile { per_block, rel_tol })
}
