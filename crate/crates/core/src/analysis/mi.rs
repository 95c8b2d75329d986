//! Binned mutual information between inputs and per-block representations.
//!
//! With deterministic blocks, I(X; T_i) for a finite batch reduces to the
//! entropy of the discretized representation: each activation coordinate
//! is binned on an equal-width grid over its observed range, every sample
//! becomes a bin pattern, and the pattern distribution's entropy (in bits)
//! estimates how much of the input's identity the block still carries.
//! The estimate lives in [0, log2(n)] and hits the top exactly when all
//! patterns are distinct.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::multiexit::MultiExitModel;
use crate::numerics::tensor::Tensor;

/// Default number of equal-width bins per activation coordinate.
pub const DEFAULT_MI_BINS: usize = 30;

/// Entropy in bits of the empirical distribution of `patterns`. Patterns
/// are compared byte-for-byte; the order of samples does not matter.
pub fn pattern_entropy_bits(patterns: &[Vec<u32>]) -> f64 {
    if patterns.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<&[u32], usize> = BTreeMap::new();
    for p in patterns {
        *counts.entry(p.as_slice()).or_insert(0) += 1;
    }
    let n = patterns.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Bins one activation matrix: coordinate `j` of every sample is placed on
/// an equal-width grid of `bins` cells spanning that coordinate's observed
/// min..max (a constant coordinate maps to bin 0; the maximum clamps to
/// the last bin).
pub fn bin_patterns(act: &Tensor, bins: usize) -> Result<Vec<Vec<u32>>> {
    if bins == 0 {
        return Err(Error::InvalidParameter(
            "binning needs at least one bin".into(),
        ));
    }
    let (n, m) = (act.rows(), act.cols());
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for i in 0..n {
        for j in 0..m {
            let v = act.data()[i * m + j];
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut patterns = Vec::with_capacity(n);
    for i in 0..n {
        let mut pat = Vec::with_capacity(m);
        for j in 0..m {
            let v = act.data()[i * m + j];
            let width = hi[j] - lo[j];
            let b = if width <= 0.0 {
                0
            } else {
                (((v - lo[j]) / width * bins as f64) as usize).min(bins - 1)
            };
            pat.push(b as u32);
        }
        patterns.push(pat);
    }
    Ok(patterns)
}

/// Binned information carried by one block's representation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMI {
    /// Backbone block index (1-based).
    pub block: usize,
    /// Pattern entropy in bits; bounded by `log2(samples)`.
    pub bits: f64,
    /// Number of distinct bin patterns observed.
    pub distinct: usize,
}

/// Per-block information profile for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MIProfile {
    pub per_block: Vec<BlockMI>,
    pub bins: usize,
    pub samples: usize,
}

/// Computes [`BlockMI`] for every live block on the batch `x` using
/// `bins` equal-width bins per coordinate.
pub fn mi_profile(model: &MultiExitModel, x: &Tensor, bins: usize) -> Result<MIProfile> {
    let out = model.forward_all(x, true)?;
    let mut per_block = Vec::with_capacity(out.activations.len());
    for (i, act) in out.activations.iter().enumerate() {
        let patterns = bin_patterns(act, bins)?;
        let mut distinct: BTreeMap<&[u32], ()> = BTreeMap::new();
        for p in &patterns {
            distinct.insert(p.as_slice(), ());
        }
        per_block.push(BlockMI {
            block: i + 1,
            bits: pattern_entropy_bits(&patterns),
            distinct: distinct.len(),
        });
    }
    Ok(MIProfile {
        per_block,
        bins,
        samples: x.rows(),
    })
}
