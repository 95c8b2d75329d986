//! Named parameter collections and the bulk operations instruments need
//! (flattening, interpolation, hashing).
//!
//! Parameters are keyed by canonical names (`block3.w`, `head7.b`, ...).
//! Where element order matters — flattening, hashing, checkpoints — callers
//! pass an explicit name order rather than relying on map iteration.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Named parameter set. `BTreeMap` keeps iteration deterministic.
pub type Params = BTreeMap<String, Tensor>;

/// Concatenates the named tensors' elements in the order given.
///
/// Errors if a name is missing from `params`.
pub fn flatten(params: &Params, order: &[String]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for name in order {
        let t = params
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        out.extend_from_slice(t.data());
    }
    Ok(out)
}

/// SHA-256 digest of the named tensors (name, shape, and little-endian
/// element bytes) in the order given. Bit-identical parameter sets — and
/// only those — hash equal, which is how freeze contracts are checked.
pub fn hash_params(params: &Params, order: &[String]) -> Result<[u8; 32]> {
    let mut h = Sha256::new();
    for name in order {
        let t = params
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        h.update(name.as_bytes());
        h.update([0u8]);
        for &d in t.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for &v in t.data() {
            h.update(v.to_le_bytes());
        }
    }
    let digest = h.finalize();
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    Ok(out)
}

/// Element-wise `(1 - lambda) * a + lambda * b` over matching names.
///
/// Errors if the key sets or shapes disagree.
pub fn lerp(a: &Params, b: &Params, lambda: f64) -> Result<Params> {
    combine(a, b, 1.0 - lambda, lambda)
}

/// Element-wise `ca * a + cb * b` over matching names.
pub fn combine(a: &Params, b: &Params, ca: f64, cb: f64) -> Result<Params> {
    if a.len() != b.len() {
        return Err(Error::LayoutMismatch(format!(
            "parameter sets have {} vs {} entries",
            a.len(),
            b.len()
        )));
    }
    let mut out = Params::new();
    for (name, ta) in a {
        let tb = b
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        if ta.shape() != tb.shape() {
            return Err(Error::LayoutMismatch(format!(
                "parameter '{name}' has shape {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| ca * x + cb * y)
            .collect();
        out.insert(name.clone(), Tensor::new(ta.shape().to_vec(), data)?);
    }
    Ok(out)
}

/// `base + cx * dx + cy * dy` over matching names (used to walk loss
/// surfaces along two fixed directions).
pub fn perturb(base: &Params, cx: f64, dx: &Params, cy: f64, dy: &Params) -> Result<Params> {
    let mut out = Params::new();
    for (name, t) in base {
        let tx = dx
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        let ty = dy
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        if tx.shape() != t.shape() || ty.shape() != t.shape() {
            return Err(Error::LayoutMismatch(format!(
                "direction shapes for '{name}' disagree with the model"
            )));
        }
        let data = t
            .data()
            .iter()
            .zip(tx.data().iter().zip(ty.data()))
            .map(|(b, (x, y))| b + cx * x + cy * y)
            .collect();
        out.insert(name.clone(), Tensor::new(t.shape().to_vec(), data)?);
    }
    Ok(out)
}

/// Squared Frobenius distance between two parameter sets with equal layout.
pub fn sq_distance(a: &Params, b: &Params) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LayoutMismatch(format!(
            "parameter sets have {} vs {} entries",
            a.len(),
            b.len()
        )));
    }
    let mut total = 0.0;
    for (name, ta) in a {
        let tb = b
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        if ta.shape() != tb.shape() {
            return Err(Error::LayoutMismatch(format!(
                "parameter '{name}' has shape {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        total += ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    Ok(total)
}
