//! Loss along straight lines and planes between trained models.
//!
//! After aligning hidden units with [`crate::analysis::permutation`], two
//! independently trained models can be compared by evaluating the
//! multi-exit objective along the segment between their weights
//! ([`interpolate_loss`]) or over an affine plane spanned by three models
//! ([`plane_loss`]). All evaluations are raw losses; any clipping for
//! display belongs to the plotting layer.

use crate::error::{Error, Result};
use crate::exec;
use crate::multiexit::{Labels, MultiExitModel};
use crate::numerics::params::{combine, lerp, perturb};
use crate::numerics::tensor::Tensor;

/// Losses of one interpolated model: the weighted total and the per-exit
/// breakdown at interpolation coordinate `lambda`.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub total: f64,
    pub per_exit: Vec<f64>,
}

/// Uniform grid of `points >= 2` interpolation coordinates spanning
/// exactly [0, 1].
pub fn lambda_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidParameter(
            "an interpolation grid needs at least the two endpoints".into(),
        ));
    }
    Ok((0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect())
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if !lambdas.contains(&0.0) || !lambdas.contains(&1.0) {
        return Err(Error::InvalidParameter(
            "interpolation grid must contain both endpoints 0 and 1".into(),
        ));
    }
    for &l in lambdas {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidParameter(format!(
                "interpolation coordinate {l} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

fn same_layout(a: &MultiExitModel, b: &MultiExitModel, what: &str) -> Result<()> {
    if a.spec != b.spec && {
        let (mut sa, mut sb) = (a.spec.clone(), b.spec.clone());
        sa.init_seed = 0;
        sb.init_seed = 0;
        sa != sb
    } {
        return Err(Error::LayoutMismatch(format!(
            "{what} needs models of identical architecture"
        )));
    }
    Ok(())
}

/// Evaluates the objective along the segment `(1 - λ)·A + λ·B` for every
/// λ in `lambdas` (which must contain 0 and 1 and stay inside [0, 1]).
/// `b` is expected to be already aligned to `a`. Points are evaluated
/// concurrently and returned in grid order, endpoints reproducing the raw
/// losses of `a` and `b` exactly.
pub fn interpolate_loss(
    a: &MultiExitModel,
    b: &MultiExitModel,
    lambdas: &[f64],
    x: &Tensor,
    y: &Labels,
    alpha: &[f64],
) -> Result<Vec<PathPoint>> {
    same_layout(a, b, "interpolation")?;
    check_lambdas(lambdas)?;
    let results = exec::map_indexed(lambdas.len(), |i| -> Result<PathPoint> {
        let l = lambdas[i];
        let params = lerp(&a.params, &b.params, l)?;
        let model = MultiExitModel {
            spec: a.spec.clone(),
            params,
        };
        let (total, per_exit) = model.multi_exit_loss(x, y, alpha)?;
        Ok(PathPoint {
            lambda: l,
            total,
            per_exit,
        })
    });
    results.into_iter().collect()
}

/// Loss surface over the affine plane through three aligned models.
#[derive(Debug, Clone)]
pub struct PlaneGrid {
    /// Grid resolution per axis.
    pub r: usize,
    /// Plane coordinates, identical for both axes; `axis[i0] == 0` and
    /// `axis[i1] == 1` exactly.
    pub axis: Vec<f64>,
    /// Row-major totals: `total[is * r + it]` is the loss at
    /// `A + axis[is]·(B - A) + axis[it]·(C - A)`.
    pub total: Vec<f64>,
    /// Per-exit losses in the same layout, one grid per exit.
    pub per_exit: Vec<Vec<f64>>,
    /// Grid indices of the three vertices A, B, C.
    pub vertices: [(usize, usize); 3],
}

/// Default plane resolution; `(25 - 1) % 6 == 0` puts all three vertices
/// exactly on grid points.
pub const DEFAULT_PLANE_RESOLUTION: usize = 25;

/// Plane coordinates for resolution `r`: `r` points spanning
/// [-0.25, 1.25]. Requires `(r - 1) % 6 == 0` (and `r >= 7`) so that 0
/// and 1 land exactly on the grid; the arithmetic guarantees those two
/// entries are exact floats.
pub fn plane_axis(r: usize) -> Result<Vec<f64>> {
    if r < 7 || (r - 1) % 6 != 0 {
        return Err(Error::InvalidParameter(format!(
            "plane resolution must satisfy (r - 1) % 6 == 0 with r >= 7, got {r}"
        )));
    }
    let denom = (r - 1) as f64;
    Ok((0..r)
        // axis[i] = -0.25 + 1.5 * i / (r - 1), written so the numerator is
        // exactly zero at i = (r-1)/6 and exactly 4(r-1) at i = 5(r-1)/6,
        // making those two grid values exact floats (0.0 and 1.0).
        .map(|i| ((6 * i) as f64 - denom) * 0.25 / denom)
        .collect())
}

/// Evaluates the objective over the plane through `a`, `b`, `c` (both
/// aligned to `a`): the point at grid index `(is, it)` has weights
/// `A + s·(B - A) + t·(C - A)` with `s = axis[is]`, `t = axis[it]`.
/// The grid covers the triangle with margin, vertices landing exactly on
/// grid points so their losses reproduce the unperturbed models'. Raw
/// losses are returned; display clipping is the plot layer's concern.
pub fn plane_loss(
    a: &MultiExitModel,
    b: &MultiExitModel,
    c: &MultiExitModel,
    r: usize,
    x: &Tensor,
    y: &Labels,
    alpha: &[f64],
) -> Result<PlaneGrid> {
    same_layout(a, b, "plane evaluation")?;
    same_layout(a, c, "plane evaluation")?;
    let axis = plane_axis(r)?;
    let db = combine(&b.params, &a.params, 1.0, -1.0)?;
    let dc = combine(&c.params, &a.params, 1.0, -1.0)?;

    let results = exec::map_indexed(r * r, |idx| -> Result<(f64, Vec<f64>)> {
        let (is, it) = (idx / r, idx % r);
        let params = perturb(&a.params, axis[is], &db, axis[it], &dc)?;
        let model = MultiExitModel {
            spec: a.spec.clone(),
            params,
        };
        model.multi_exit_loss(x, y, alpha)
    });

    let num_exits = a.spec.num_exits();
    let mut total = Vec::with_capacity(r * r);
    let mut per_exit = vec![Vec::with_capacity(r * r); num_exits];
    for point in results {
        let (t, per) = point?;
        total.push(t);
        for (k, l) in per.into_iter().enumerate() {
            per_exit[k].push(l);
        }
    }
    let i0 = (r - 1) / 6;
    let i1 = 5 * (r - 1) / 6;
    Ok(PlaneGrid {
        r,
        axis,
        total,
        per_exit,
        vertices: [(i0, i0), (i1, i0), (i0, i1)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::permutation::{apply_permutation, Permutation};
    use crate::multiexit::{build_model, HeadShape, ModelSpec, Task};
    use crate::numerics::rng::gaussian;
    use rand::seq::SliceRandom;

    fn fixture(seed: u64) -> MultiExitModel {
        build_model(&ModelSpec {
            input_dim: 3,
            hidden_dim: 4,
            blocks: 2,
            placements: vec![1, 2],
            head: HeadShape::Linear,
            task: Task::Classification { classes: 3 },
            init_seed: seed,
        })
        .unwrap()
    }

    fn data(n: usize) -> (Tensor, Labels) {
        let x = gaussian(900, "connectivity/x", &[n, 3]);
        let y = Labels::Classes((0..n).map(|i| i % 3).collect());
        (x, y)
    }

    #[test]
    fn endpoints_reproduce_the_models_exactly() {
        let (a, b) = (fixture(1), fixture(2));
        let (x, y) = data(6);
        let alpha = vec![0.5, 1.5];
        let grid = lambda_grid(5).unwrap();
        let path = interpolate_loss(&a, &b, &grid, &x, &y, &alpha).unwrap();
        let (la, _) = a.multi_exit_loss(&x, &y, &alpha).unwrap();
        let (lb, _) = b.multi_exit_loss(&x, &y, &alpha).unwrap();
        assert_eq!(path[0].total, la, "λ = 0 must equal A's loss");
        assert_eq!(path[4].total, lb, "λ = 1 must equal B's loss");
        assert_eq!(path.len(), 5);
    }

    #[test]
    fn midpoint_matches_a_direct_evaluation() {
        let (a, b) = (fixture(3), fixture(4));
        let (x, y) = data(8);
        let alpha = vec![1.0, 1.0];
        let grid = lambda_grid(3).unwrap();
        let path = interpolate_loss(&a, &b, &grid, &x, &y, &alpha).unwrap();
        let mid = MultiExitModel {
            spec: a.spec.clone(),
            params: lerp(&a.params, &b.params, 0.5).unwrap(),
        };
        let (total, per) = mid.multi_exit_loss(&x, &y, &alpha).unwrap();
        assert!((path[1].total - total).abs() < 1e-12);
        for (got, want) in path[1].per_exit.iter().zip(&per) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolating_a_model_with_its_permuted_twin_stays_flat_only_at_endpoints() {
        // A permuted twin computes the same function, so endpoint losses
        // agree; interior points generally differ (the barrier the
        // alignment instruments measure).
        let a = fixture(5);
        let mut by_block = Vec::new();
        for i in 0..a.spec.blocks {
            let mut p: Vec<usize> = (0..a.spec.hidden_dim).collect();
            p.shuffle(&mut crate::numerics::rng::named_rng(77, &format!("c/{i}")));
            by_block.push(p);
        }
        let b = apply_permutation(&a, &Permutation { by_block }).unwrap();
        let (x, y) = data(6);
        let alpha = vec![1.0, 1.0];
        let path = interpolate_loss(&a, &b, &lambda_grid(3).unwrap(), &x, &y, &alpha).unwrap();
        assert!((path[0].total - path[2].total).abs() < 1e-12);
    }

    #[test]
    fn grid_requires_endpoints() {
        let (a, b) = (fixture(1), fixture(2));
        let (x, y) = data(4);
        let alpha = vec![1.0, 1.0];
        assert!(interpolate_loss(&a, &b, &[0.0, 0.5], &x, &y, &alpha).is_err());
        assert!(interpolate_loss(&a, &b, &[0.5, 1.0], &x, &y, &alpha).is_err());
        assert!(interpolate_loss(&a, &b, &[0.0, 1.0, 1.5], &x, &y, &alpha).is_err());
        assert!(lambda_grid(1).is_err());
    }

    #[test]
    fn plane_axis_hits_zero_and_one_exactly() {
        for r in [7, 13, 25, 31] {
            let axis = plane_axis(r).unwrap();
            assert_eq!(axis.len(), r);
            assert_eq!(axis[0], -0.25);
            assert_eq!(axis[r - 1], 1.25);
            assert_eq!(axis[(r - 1) / 6], 0.0, "r = {r}");
            assert_eq!(axis[5 * (r - 1) / 6], 1.0, "r = {r}");
        }
        assert!(plane_axis(24).is_err());
        assert!(plane_axis(6).is_err());
    }

    #[test]
    fn plane_vertices_reproduce_the_three_models() {
        let (a, b, c) = (fixture(6), fixture(7), fixture(8));
        let (x, y) = data(6);
        let alpha = vec![1.0, 1.0];
        let grid = plane_loss(&a, &b, &c, 7, &x, &y, &alpha).unwrap();
        let losses = [
            a.multi_exit_loss(&x, &y, &alpha).unwrap().0,
            b.multi_exit_loss(&x, &y, &alpha).unwrap().0,
            c.multi_exit_loss(&x, &y, &alpha).unwrap().0,
        ];
        for (v, want) in grid.vertices.iter().zip(losses) {
            let got = grid.total[v.0 * grid.r + v.1];
            assert_eq!(got, want, "vertex {v:?} must reproduce its model");
        }
    }

    #[test]
    fn plane_interior_matches_direct_evaluation() {
        let (a, b, c) = (fixture(9), fixture(10), fixture(11));
        let (x, y) = data(5);
        let alpha = vec![2.0, 0.5];
        let grid = plane_loss(&a, &b, &c, 7, &x, &y, &alpha).unwrap();
        let (is, it) = (2, 4);
        let (s, t) = (grid.axis[is], grid.axis[it]);
        let db = combine(&b.params, &a.params, 1.0, -1.0).unwrap();
        let dc = combine(&c.params, &a.params, 1.0, -1.0).unwrap();
        let direct = MultiExitModel {
            spec: a.spec.clone(),
            params: perturb(&a.params, s, &db, t, &dc).unwrap(),
        };
        let (total, per) = direct.multi_exit_loss(&x, &y, &alpha).unwrap();
        assert!((grid.total[is * grid.r + it] - total).abs() < 1e-12);
        for (k, want) in per.iter().enumerate() {
            assert!((grid.per_exit[k][is * grid.r + it] - want).abs() < 1e-12);
        }
    }
}
