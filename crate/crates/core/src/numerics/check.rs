//! Gradient checking by central finite differences.
//!
//! These routines only ever call `forward`, so they are an independent
//! oracle for reverse accumulation: they would still be correct if the
//! backward pass were deleted.

use crate::error::{Error, Result};
use crate::numerics::graph::Graph;
use crate::numerics::params::Params;

/// Central-difference gradient of the graph's scalar root with respect to
/// the named leaves: `(f(x + h e_i) - f(x - h e_i)) / 2h` per element.
///
/// Leaves the graph's cached values as if `forward(bindings)` had just run.
pub fn fd_grad(graph: &mut Graph, bindings: &Params, wrt: &[String], h: f64) -> Result<Params> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {h}")));
    }
    graph.forward(bindings)?;
    let root = graph.root();
    if !graph.value(root)?.is_scalar() {
        return Err(Error::NonScalarRoot {
            shape: graph.value(root)?.shape().to_vec(),
        });
    }

    let mut out = Params::new();
    for name in wrt {
        let base = bindings
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        let mut grad = Vec::with_capacity(base.numel());
        let mut probe = bindings.clone();
        for idx in 0..base.numel() {
            let original = base.data()[idx];
            probe.get_mut(name).unwrap().data_mut()[idx] = original + h;
            let f_plus = graph.forward_root(&probe)?.item();
            probe.get_mut(name).unwrap().data_mut()[idx] = original - h;
            let f_minus = graph.forward_root(&probe)?.item();
            probe.get_mut(name).unwrap().data_mut()[idx] = original;
            grad.push((f_plus - f_minus) / (2.0 * h));
        }
        out.insert(
            name.clone(),
            crate::numerics::tensor::Tensor::new(base.shape().to_vec(), grad)?,
        );
    }

    // Restore the cache for the unperturbed bindings so callers can keep
    // using the graph.
    graph.forward(bindings)?;
    Ok(out)
}

/// Worst-case relative disagreement between two gradient sets:
/// `max_i |a_i - b_i| / max(1, |a_i| + |b_i|)` over all shared elements.
/// Panics if the key sets or shapes differ — comparing gradients of
/// different parameters is a bug, not data.
pub fn max_rel_err(a: &Params, b: &Params) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient sets differ in size");
    let mut worst = 0.0_f64;
    for (name, ta) in a {
        let tb = b.get(name).unwrap_or_else(|| panic!("missing '{name}'"));
        assert_eq!(ta.shape(), tb.shape(), "shape mismatch for '{name}'");
        for (x, y) in ta.data().iter().zip(tb.data()) {
            let rel = (x - y).abs() / 1.0_f64.max(x.abs() + y.abs());
            worst = worst.max(rel);
        }
    }
    worst
}
