//! Two-dimensional loss surfaces around a trained model.
//!
//! The surface is `f(x, y) = L(θ* + x·δ + y·η)` with random directions δ,
//! η made scale-comparable by filter normalization: each per-neuron slice
//! of a direction (a column of a weight matrix in the `[in, out]` layout
//! used here) is rescaled to the norm of the model's matching slice, and
//! each bias vector is rescaled as a whole. Slices where the model is
//! exactly zero get a zero direction. The anchor `f(0, 0)` reproduces the
//! model's own loss exactly.

use crate::error::{Error, Result};
use crate::exec;
use crate::multiexit::{Labels, MultiExitModel};
use crate::numerics::params::{perturb, Params};
use crate::numerics::rng::gaussian;
use crate::numerics::tensor::Tensor;

/// Default landscape resolution (odd, so the anchor lands on the grid).
pub const DEFAULT_LANDSCAPE_RESOLUTION: usize = 51;

fn slice_norm(data: &[f64], stride: usize, offset: usize, count: usize) -> f64 {
    (0..count)
        .map(|i| {
            let v = data[offset + i * stride];
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescales one direction tensor so every per-neuron slice matches the
/// norm of the model's slice: column-wise for matrices, whole-vector for
/// biases. A zero model slice zeroes the direction slice.
fn filter_normalize(model: &Tensor, mut direction: Tensor) -> Tensor {
    match model.shape() {
        [rows, cols] => {
            for c in 0..*cols {
                let m = slice_norm(model.data(), *cols, c, *rows);
                let d = slice_norm(direction.data(), *cols, c, *rows);
                let scale = if m == 0.0 || d == 0.0 { 0.0 } else { m / d };
                for r in 0..*rows {
                    direction.data_mut()[r * cols + c] *= scale;
                }
            }
        }
        _ => {
            let m = slice_norm(model.data(), 1, 0, model.data().len());
            let d = slice_norm(direction.data(), 1, 0, direction.data().len());
            let scale = if m == 0.0 || d == 0.0 { 0.0 } else { m / d };
            for v in direction.data_mut() {
                *v *= scale;
            }
        }
    }
    direction
}

/// Draws one filter-normalized random direction for every parameter of
/// `params`, from the streams `(seed, "landscape/{tag}/{name}")`.
pub fn filter_normalized_direction(params: &Params, seed: u64, tag: &str) -> Params {
    params
        .iter()
        .map(|(name, t)| {
            let raw = gaussian(seed, &format!("landscape/{tag}/{name}"), t.shape());
            (name.clone(), filter_normalize(t, raw))
        })
        .collect()
}

/// A sampled loss surface around one model.
#[derive(Debug, Clone)]
pub struct LandscapeGrid {
    /// Points per axis (odd).
    pub r: usize,
    /// Shared axis for x and y: `r` points spanning exactly [-1, 1] with
    /// 0 at the center.
    pub axis: Vec<f64>,
    /// Row-major totals: `total[ix * r + iy] = L(θ* + axis[ix]·δ + axis[iy]·η)`.
    pub total: Vec<f64>,
    /// Per-exit losses in the same layout.
    pub per_exit: Vec<Vec<f64>>,
    /// The filter-normalized directions actually used (shared by the
    /// total and every per-exit surface).
    pub delta: Params,
    pub eta: Params,
}

impl LandscapeGrid {
    /// Grid index of the anchor (0, 0).
    pub fn center(&self) -> usize {
        let mid = (self.r - 1) / 2;
        mid * self.r + mid
    }
}

/// Evaluates the weighted objective and per-exit losses of
/// `θ* + x·δ + y·η` over an `r × r` grid on [-1, 1]² (`r` odd so the
/// anchor is a grid point). Directions come from `seed`; points are
/// evaluated concurrently and assembled in grid order.
pub fn loss_landscape(
    model: &MultiExitModel,
    x: &Tensor,
    y: &Labels,
    alpha: &[f64],
    r: usize,
    seed: u64,
) -> Result<LandscapeGrid> {
    if r < 3 || r % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "landscape resolution must be odd and at least 3, got {r}"
        )));
    }
    let delta = filter_normalized_direction(&model.params, seed, "dx");
    let eta = filter_normalized_direction(&model.params, seed, "dy");
    let denom = (r - 1) as f64;
    let axis: Vec<f64> = (0..r).map(|i| -1.0 + 2.0 * i as f64 / denom).collect();

    let results = exec::map_indexed(r * r, |idx| -> Result<(f64, Vec<f64>)> {
        let (ix, iy) = (idx / r, idx % r);
        let params = perturb(&model.params, axis[ix], &delta, axis[iy], &eta)?;
        let probe = MultiExitModel {
            spec: model.spec.clone(),
            params,
        };
        probe.multi_exit_loss(x, y, alpha)
    });

    let num_exits = model.spec.num_exits();
    let mut total = Vec::with_capacity(r * r);
    let mut per_exit = vec![Vec::with_capacity(r * r); num_exits];
    for point in results {
        let (t, per) = point?;
        total.push(t);
        for (k, l) in per.into_iter().enumerate() {
            per_exit[k].push(l);
        }
    }
    Ok(LandscapeGrid {
        r,
        axis,
        total,
        per_exit,
        delta,
        eta,
    })
}
