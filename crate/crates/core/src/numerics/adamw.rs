//! AdamW with decoupled weight decay.
//!
//! The decay is applied to the parameter *before* the Adam update:
//! `p <- p * (1 - lr * wd)`, then the usual bias-corrected moment step
//! `p <- p - lr * m_hat / (sqrt(v_hat) + eps)`.
//!
//! Moment buffers are keyed by parameter name and created lazily on the
//! first gradient for that name, so one state can serve objectives that
//! touch different parameter subsets on different steps. Each parameter's
//! update depends only on its own moments, which makes updates invariant
//! to how the parameter set is partitioned across separately stepped
//! states (with zero weight decay the trajectories coincide exactly).

use crate::error::{Error, Result};
use crate::numerics::params::Params;
use crate::numerics::tensor::Tensor;

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.eps.is_finite()
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("AdamW hyperparameters out of range: {self:?}")))
        }
    }
}

/// First/second moment buffers plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamWState {
    cfg: AdamWConfig,
    t: u64,
    m: Params,
    v: Params,
}

impl AdamWState {
    pub fn new(cfg: AdamWConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(AdamWState {
            cfg,
            t: 0,
            m: Params::new(),
            v: Params::new(),
        })
    }

    /// Completed optimizer steps.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// First-moment buffer for a parameter, if one exists yet.
    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.m.get(name)
    }

    /// Second-moment buffer for a parameter, if one exists yet.
    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.v.get(name)
    }
}

/// One AdamW step over every parameter named in `grads`.
///
/// Parameters absent from `grads` are untouched: no decay, no moment
/// update. Errors on unknown parameter names, shape disagreement, a
/// negative or non-finite learning rate, or any non-finite gradient.
pub fn adamw_step(
    state: &mut AdamWState,
    params: &mut Params,
    grads: &Params,
    lr: f64,
) -> Result<()> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidParameter(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    for (name, g) in grads {
        if !g.all_finite() {
            return Err(Error::NonFiniteGrad(name.clone()));
        }
        let p = params
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.clone()))?;
        if p.shape() != g.shape() {
            return Err(Error::LayoutMismatch(format!(
                "gradient for '{name}' has shape {:?}, parameter has {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }

    state.t += 1;
    let t = i32::try_from(state.t).expect("step counter exceeds i32");
    let cfg = state.cfg;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    for (name, g) in grads {
        let p = params.get_mut(name).expect("validated above");
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape()));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape()));

        let decay = 1.0 - lr * cfg.weight_decay;
        for i in 0..p.numel() {
            let gi = g.data()[i];
            let mi = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
            let vi = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            let pv = p.data()[i] * decay;
            p.data_mut()[i] = pv - lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
