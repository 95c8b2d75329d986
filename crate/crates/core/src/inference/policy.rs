//! Exit policies: when does a sample stop at an early head?
//!
//! `Threshold` exits at the first head whose confidence clears τ.
//! `Patience` exits once `t` consecutive heads agree on the prediction
//! (identical argmax for classification, within a tolerance for
//! regression). Both fall back to the last exit when nothing fires —
//! the last head is always an answer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::confidence::{confidence, Criterion};
use crate::multiexit::model::Task;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitPolicy {
    Threshold {
        criterion: Criterion,
        tau: f64,
    },
    Patience {
        t: usize,
        /// Max |difference| under which two consecutive regression
        /// predictions count as agreeing. Ignored for classification.
        agree_tol: Option<f64>,
    },
}

impl ExitPolicy {
    /// The swept parameter as a number (τ, or t) for reports.
    pub fn parameter(&self) -> f64 {
        match self {
            ExitPolicy::Threshold { tau, .. } => *tau,
            ExitPolicy::Patience { t, .. } => *t as f64,
        }
    }

    /// Checks the policy against a model with `k` exits and the given
    /// task.
    pub fn validate(&self, k: usize, task: &Task) -> Result<()> {
        match self {
            ExitPolicy::Threshold { tau, .. } => {
                if !(0.0..=1.0).contains(tau) {
                    return Err(Error::InvalidParameter(format!(
                        "threshold tau must lie in [0,1], got {tau}"
                    )));
                }
                if matches!(task, Task::Regression) {
                    return Err(Error::UnsupportedCriterion(
                        "probability criteria need classification logits".into(),
                    ));
                }
                Ok(())
            }
            ExitPolicy::Patience { t, agree_tol } => {
                if *t < 1 || *t > k {
                    return Err(Error::InvalidParameter(format!(
                        "patience must lie in [1, {k}], got {t}"
                    )));
                }
                match task {
                    Task::Regression => match agree_tol {
                        Some(tol) if tol.is_finite() && *tol >= 0.0 => Ok(()),
                        _ => Err(Error::InvalidParameter(
                            "regression patience needs a finite agreement tolerance >= 0".into(),
                        )),
                    },
                    Task::Classification { .. } => Ok(()),
                }
            }
        }
    }
}

/// What one exit predicted for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Class(usize),
    Value(f64),
}

/// Walks cached per-exit quantities in order and returns the 1-based
/// exit taken. `conf[k]` is only read by threshold policies and
/// `preds[k]` only by patience policies; the last exit is the fallback.
pub fn decide_from_cached(policy: &ExitPolicy, conf: &[f64], preds: &[Prediction]) -> usize {
    match policy {
        ExitPolicy::Threshold { tau, .. } => {
            let k = conf.len();
            for (i, &c) in conf.iter().enumerate() {
                if c >= *tau {
                    return i + 1;
                }
            }
            k
        }
        ExitPolicy::Patience { t, agree_tol } => {
            let k = preds.len();
            let mut run = 0usize;
            for i in 0..k {
                let agrees = i > 0
                    && match (preds[i - 1], preds[i]) {
                        (Prediction::Class(a), Prediction::Class(b)) => a == b,
                        (Prediction::Value(a), Prediction::Value(b)) => {
                            (a - b).abs() <= agree_tol.unwrap_or(0.0)
                        }
                        _ => false,
                    };
                run = if agrees { run + 1 } else { 1 };
                if run >= *t {
                    return i + 1;
                }
            }
            k
        }
    }
}

/// Decides the exit for one sample straight from its per-exit logit
/// rows, computing confidences/predictions in exit order.
pub fn decide_exit(task: &Task, policy: &ExitPolicy, logit_rows: &[Vec<f64>]) -> Result<usize> {
    policy.validate(logit_rows.len(), task)?;
    match policy {
        ExitPolicy::Threshold { criterion, .. } => {
            let conf: Vec<f64> = logit_rows.iter().map(|r| confidence(r, *criterion)).collect();
            Ok(decide_from_cached(policy, &conf, &[]))
        }
        ExitPolicy::Patience { .. } => {
            let preds: Vec<Prediction> = logit_rows
                .iter()
                .map(|r| match task {
                    Task::Classification { .. } => {
                        let mut best = 0;
                        for (j, &v) in r.iter().enumerate() {
                            if v > r[best] {
                                best = j;
                            }
                        }
                        Prediction::Class(best)
                    }
                    Task::Regression => Prediction::Value(r[0]),
                })
                .collect();
            Ok(decide_from_cached(policy, &[], &preds))
        }
    }
}
