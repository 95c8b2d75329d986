//! Hidden-unit permutation symmetry and weight matching.
//!
//! Re-ordering the hidden units of any backbone block — together with the
//! matching rows of every consumer of that block — leaves the network
//! function unchanged. [`Permutation`] captures one such re-indexing per
//! block, [`apply_permutation`] rewires a model accordingly, and
//! [`weight_match`] searches for the permutation that brings one model's
//! weights closest (in squared Frobenius distance) to another's, one
//! assignment subproblem per layer.

use rand::seq::SliceRandom;

use crate::analysis::hungarian::hungarian;
use crate::error::{Error, Result};
use crate::multiexit::{ModelSpec, MultiExitModel};
use crate::numerics::params::sq_distance;
use crate::numerics::rng::named_rng;
use crate::numerics::tensor::Tensor;

/// One hidden-unit re-indexing per backbone block. `by_block[i - 1][new]`
/// is the original unit that ends up at position `new` in block `i`.
/// Input features and every head's output dimension are never permuted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub by_block: Vec<Vec<usize>>,
}

impl Permutation {
    /// Identity re-indexing for every block of `spec`.
    pub fn identity(spec: &ModelSpec) -> Self {
        Permutation {
            by_block: vec![(0..spec.hidden_dim).collect(); spec.blocks],
        }
    }

    /// Checks one entry per block and that each entry is a bijection of
    /// `0..hidden_dim`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.by_block.len() != spec.blocks {
            return Err(Error::InvalidParameter(format!(
                "permutation covers {} blocks, model has {}",
                self.by_block.len(),
                spec.blocks
            )));
        }
        for (i, perm) in self.by_block.iter().enumerate() {
            if perm.len() != spec.hidden_dim {
                return Err(Error::InvalidParameter(format!(
                    "block {} permutation has {} entries, expected {}",
                    i + 1,
                    perm.len(),
                    spec.hidden_dim
                )));
            }
            let mut seen = vec![false; spec.hidden_dim];
            for &old in perm {
                if old >= spec.hidden_dim || seen[old] {
                    return Err(Error::InvalidParameter(format!(
                        "block {} permutation is not a bijection",
                        i + 1
                    )));
                }
                seen[old] = true;
            }
        }
        Ok(())
    }

    /// `inverse()[i][old] = new` — the permutation that undoes this one.
    pub fn inverse(&self) -> Self {
        Permutation {
            by_block: self
                .by_block
                .iter()
                .map(|perm| {
                    let mut inv = vec![0usize; perm.len()];
                    for (new, &old) in perm.iter().enumerate() {
                        inv[old] = new;
                    }
                    inv
                })
                .collect(),
        }
    }
}

/// Gathers rows of a matrix: `out[r, :] = w[perm[r], :]`.
fn permute_rows(w: &Tensor, perm: &[usize]) -> Result<Tensor> {
    let (rows, cols) = (w.rows(), w.cols());
    let mut data = Vec::with_capacity(rows * cols);
    for &old in perm {
        data.extend_from_slice(&w.data()[old * cols..(old + 1) * cols]);
    }
    Tensor::new(vec![rows, cols], data)
}

/// Gathers columns of a matrix: `out[:, c] = w[:, perm[c]]`.
fn permute_cols(w: &Tensor, perm: &[usize]) -> Result<Tensor> {
    let (rows, cols) = (w.rows(), w.cols());
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row = &w.data()[r * cols..(r + 1) * cols];
        for &old in perm {
            data.push(row[old]);
        }
    }
    Tensor::new(vec![rows, cols], data)
}

fn permute_vec(b: &Tensor, perm: &[usize]) -> Result<Tensor> {
    let data = perm.iter().map(|&old| b.data()[old]).collect();
    Tensor::new(b.shape().to_vec(), data)
}

/// Rewires `model` so that block `i`'s unit `new` holds what unit
/// `perm.by_block[i - 1][new]` held: block weight columns and biases are
/// gathered by the block's own permutation, block input rows by the
/// previous block's, and each head's first layer rows by its attachment
/// block's. The network function is preserved exactly (up to float
/// summation order).
pub fn apply_permutation(model: &MultiExitModel, perm: &Permutation) -> Result<MultiExitModel> {
    let spec = &model.spec;
    perm.validate(spec)?;
    let identity: Vec<usize> = (0..spec.hidden_dim).collect();

    let mut params = model.params.clone();
    for i in 1..=spec.blocks {
        let in_perm = if i == 1 {
            &identity // input features stay in place
        } else {
            &perm.by_block[i - 2]
        };
        let out_perm = &perm.by_block[i - 1];
        let [w_name, b_name] = spec.block_params(i);
        let w = &model.params[&w_name];
        let w = if i == 1 {
            permute_cols(w, out_perm)?
        } else {
            permute_cols(&permute_rows(w, in_perm)?, out_perm)?
        };
        params.insert(w_name, w);
        let bias = permute_vec(&model.params[&b_name], out_perm)?;
        params.insert(b_name, bias);
    }
    for k in 1..=spec.num_exits() {
        let attach = &perm.by_block[spec.placements[k - 1] - 1];
        let names = spec.head_params(k);
        // Only the first layer reads backbone units; the rest is untouched.
        let first = &names[0];
        params.insert(first.clone(), permute_rows(&model.params[first], attach)?);
    }
    Ok(MultiExitModel {
        spec: spec.clone(),
        params,
    })
}

/// Architectural equality that ignores the init seed: two independently
/// trained models of the same shape can be matched.
fn same_architecture(a: &ModelSpec, b: &ModelSpec) -> bool {
    a.input_dim == b.input_dim
        && a.hidden_dim == b.hidden_dim
        && a.blocks == b.blocks
        && a.placements == b.placements
        && a.head == b.head
        && a.task == b.task
}

/// Result of [`weight_match`]: the permutation found, the squared Frobenius
/// distance before and after applying it to the second model, and the
/// number of coordinate-descent sweeps used.
#[derive(Debug, Clone)]
pub struct WeightMatch {
    pub permutation: Permutation,
    pub initial_sq_distance: f64,
    pub matched_sq_distance: f64,
    pub sweeps: usize,
}

/// Heads attached at block `i`, as indices into `head_params`.
fn heads_at(spec: &ModelSpec, block: usize) -> Vec<usize> {
    (1..=spec.num_exits())
        .filter(|&k| spec.placements[k - 1] == block)
        .collect()
}

/// Cost of placing B's original unit `o` at position `c` of block `i`,
/// holding every other block's permutation fixed. Sums squared differences
/// over all weights that the choice touches: block `i`'s incoming column
/// and bias entry, block `i + 1`'s outgoing row, and the matching first
/// layer row of any head attached at block `i`.
fn unit_cost(
    a: &MultiExitModel,
    b: &MultiExitModel,
    perm: &Permutation,
    block: usize,
    c: usize,
    o: usize,
) -> f64 {
    let spec = &a.spec;
    let identity: Vec<usize> = (0..spec.hidden_dim).collect();
    let [w_name, b_name] = spec.block_params(block);
    let wa = &a.params[&w_name];
    let wb = &b.params[&w_name];
    let in_perm = if block == 1 {
        &identity
    } else {
        &perm.by_block[block - 2]
    };
    let in_dim = spec.block_in_dim(block);
    let hidden = spec.hidden_dim;
    let mut cost = 0.0;
    for r in 0..in_dim {
        let src = if block == 1 { r } else { in_perm[r] };
        let d = wa.data()[r * hidden + c] - wb.data()[src * hidden + o];
        cost += d * d;
    }
    let d = a.params[&b_name].data()[c] - b.params[&b_name].data()[o];
    cost += d * d;

    if block < spec.blocks {
        let [w_next, _] = spec.block_params(block + 1);
        let wa = &a.params[&w_next];
        let wb = &b.params[&w_next];
        let out_perm = &perm.by_block[block];
        for j in 0..hidden {
            let d = wa.data()[c * hidden + j] - wb.data()[o * hidden + out_perm[j]];
            cost += d * d;
        }
    }
    for k in heads_at(spec, block) {
        let first = &spec.head_params(k)[0];
        let wa = &a.params[first];
        let wb = &b.params[first];
        let cols = wa.cols();
        for j in 0..cols {
            let d = wa.data()[c * cols + j] - wb.data()[o * cols + j];
            cost += d * d;
        }
    }
    cost
}

/// Finds a per-block permutation bringing `b`'s weights close to `a`'s:
/// coordinate descent over blocks, each block solved exactly as a linear
/// assignment over unit pairings, visiting blocks in a seeded random order
/// each sweep, until a full sweep makes no strict improvement (at most
/// [`MAX_MATCH_SWEEPS`]). Starting from the identity, the matched distance
/// never exceeds the unmatched one.
pub fn weight_match(a: &MultiExitModel, b: &MultiExitModel, seed: u64) -> Result<WeightMatch> {
    if !same_architecture(&a.spec, &b.spec) {
        return Err(Error::LayoutMismatch(
            "weight matching needs two models of identical architecture".into(),
        ));
    }
    let spec = &a.spec;
    let hidden = spec.hidden_dim;
    let initial = sq_distance(&a.params, &b.params)?;

    let mut perm = Permutation::identity(spec);
    let mut sweeps = 0;
    for t in 0..MAX_MATCH_SWEEPS {
        let mut order: Vec<usize> = (1..=spec.blocks).collect();
        order.shuffle(&mut named_rng(seed, &format!("match/sweep{t}")));
        let mut improved = false;
        for block in order {
            let cost: Vec<Vec<f64>> = (0..hidden)
                .map(|c| {
                    (0..hidden)
                        .map(|o| unit_cost(a, b, &perm, block, c, o))
                        .collect()
                })
                .collect();
            let current: f64 = (0..hidden)
                .map(|c| cost[c][perm.by_block[block - 1][c]])
                .sum();
            let solved = hungarian(&cost)?;
            if solved.cost < current {
                perm.by_block[block - 1] = solved.assignment;
                improved = true;
            }
        }
        sweeps = t + 1;
        if !improved {
            break;
        }
    }

    let matched_sq_distance = sq_distance(&a.params, &apply_permutation(b, &perm)?.params)?;
    Ok(WeightMatch {
        permutation: perm,
        initial_sq_distance: initial,
        matched_sq_distance,
        sweeps,
    })
}

/// Upper bound on coordinate-descent sweeps before giving up on
/// convergence.
pub const MAX_MATCH_SWEEPS: usize = 50;
