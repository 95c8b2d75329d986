//! The seven training regimes, each a composition of single-objective
//! phases (or, for `alternating`, a per-step interleaving of two
//! objectives).
//!
//! - `disjoint`: train backbone + final head, then freeze the backbone
//!   and train all heads.
//! - `joint`: train everything at once under the weighted objective.
//! - `mixed`: train backbone + final head, then everything jointly.
//! - `branch-wise`: one phase per exit, unfreezing only that exit's head
//!   and its private backbone segment.
//! - `separate`: K phases; phase i jointly trains exits 1..=i, nothing
//!   frozen.
//! - `alternating`: every optimizer step flips between the final-exit
//!   objective and the joint objective, one shared optimizer.
//! - `mixed-gradual`: K phases; phase i trains the *last* i exits,
//!   nothing frozen — phase 1 coincides with the final-exit objective
//!   and the last phase with the joint one.
//!
//! Multi-exit phases restrict the full weight vector to the
//! participating exits without renormalizing, so the final phase of
//! `separate` and `mixed-gradual` is exactly the joint objective.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiexit::cost::cost_model;
use crate::multiexit::model::{Labels, MultiExitModel};
use crate::numerics::tensor::Tensor;
use crate::regimes::train::{
    final_exit_phase, joint_phase, participating, path_params, run_alternating, run_phase,
    PhaseDef, TrainLog, TrainOptions,
};
use crate::regimes::weights::{loss_weights, LossWeighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    Disjoint,
    Joint,
    Mixed,
    BranchWise,
    Separate,
    Alternating,
    MixedGradual,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 7] = [
        RegimeKind::Disjoint,
        RegimeKind::Joint,
        RegimeKind::Mixed,
        RegimeKind::BranchWise,
        RegimeKind::Separate,
        RegimeKind::Alternating,
        RegimeKind::MixedGradual,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RegimeKind::Disjoint => "disjoint",
            RegimeKind::Joint => "joint",
            RegimeKind::Mixed => "mixed",
            RegimeKind::BranchWise => "branch-wise",
            RegimeKind::Separate => "separate",
            RegimeKind::Alternating => "alternating",
            RegimeKind::MixedGradual => "mixed-gradual",
        }
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown regime {s:?} (expected one of disjoint, joint, mixed, \
                     branch-wise, separate, alternating, mixed-gradual)"
                ))
            })
    }
}

/// How the per-exit loss terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Uniform,
    Inc,
    Dec,
    Sdn,
    /// Unweighted losses with per-block gradient rebalancing.
    Ge,
}

impl Scaling {
    pub fn name(&self) -> &'static str {
        match self {
            Scaling::Uniform => "uniform",
            Scaling::Inc => "inc",
            Scaling::Dec => "dec",
            Scaling::Sdn => "sdn",
            Scaling::Ge => "ge",
        }
    }

    /// The weight vector for all exits plus whether gradient rebalancing
    /// is active.
    pub fn resolve(&self, cm: &crate::multiexit::cost::CostModel) -> (Vec<f64>, bool) {
        match self {
            Scaling::Uniform => (loss_weights(LossWeighting::Uniform, cm), false),
            Scaling::Inc => (loss_weights(LossWeighting::Inc, cm), false),
            Scaling::Dec => (loss_weights(LossWeighting::Dec, cm), false),
            Scaling::Sdn => (loss_weights(LossWeighting::Sdn, cm), false),
            Scaling::Ge => (vec![1.0; cm.num_exits()], true),
        }
    }
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Scaling::Uniform),
            "inc" => Ok(Scaling::Inc),
            "dec" => Ok(Scaling::Dec),
            "sdn" => Ok(Scaling::Sdn),
            "ge" => Ok(Scaling::Ge),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scaling {s:?} (expected uniform, inc, dec, sdn, or ge)"
            ))),
        }
    }
}

/// A regime choice: which phase composition and which loss scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub kind: RegimeKind,
    pub scaling: Scaling,
}

/// Backbone blocks owned by exit `k` under branch-wise training: the
/// half-open segment from the previous exit's placement (exclusive) to
/// this exit's placement (inclusive).
fn branch_segment(placements: &[usize], k: usize) -> std::ops::RangeInclusive<usize> {
    let lo = if k == 1 { 1 } else { placements[k - 2] + 1 };
    lo..=placements[k - 1]
}

/// Runs a full regime, mutating the model in place and returning the log.
/// Every phase gets a fresh optimizer and learning-rate schedule and its
/// own early stop; logged epoch numbers increase across phases.
pub fn run_regime(
    spec: &RegimeSpec,
    model: &mut MultiExitModel,
    train: (&Tensor, &Labels),
    val: (&Tensor, &Labels),
    opts: &TrainOptions,
) -> Result<TrainLog> {
    let cm = cost_model(&model.spec);
    let (alpha, ge) = spec.scaling.resolve(&cm);
    let k = model.spec.num_exits();
    let mut log = TrainLog::default();

    let run = |model: &mut MultiExitModel, phase: &PhaseDef, log: &mut TrainLog| -> Result<()> {
        let offset = log.total_epochs();
        let rec = run_phase(model, phase, train, val, opts, offset)?;
        log.phases.push(rec);
        Ok(())
    };

    match spec.kind {
        RegimeKind::Disjoint => {
            run(model, &final_exit_phase(&model.spec), &mut log)?;
            let heads = joint_phase(&model.spec, &alpha, false, true, "heads")?;
            run(model, &heads, &mut log)?;
        }
        RegimeKind::Joint => {
            let joint = joint_phase(&model.spec, &alpha, ge, false, "joint")?;
            run(model, &joint, &mut log)?;
        }
        RegimeKind::Mixed => {
            run(model, &final_exit_phase(&model.spec), &mut log)?;
            let joint = joint_phase(&model.spec, &alpha, ge, false, "joint")?;
            run(model, &joint, &mut log)?;
        }
        RegimeKind::BranchWise => {
            let placements = model.spec.placements.clone();
            for exit in 1..=k {
                if alpha[exit - 1] == 0.0 {
                    continue;
                }
                let mut trainable: Vec<String> = Vec::new();
                for b in branch_segment(&placements, exit) {
                    trainable.extend(model.spec.block_params(b));
                }
                trainable.extend(model.spec.head_params(exit));
                let phase = PhaseDef {
                    id: format!("branch{exit}"),
                    exits: vec![exit],
                    alpha: vec![alpha[exit - 1]],
                    ge: false,
                    trainable,
                };
                run(model, &phase, &mut log)?;
            }
        }
        RegimeKind::Separate => {
            for i in 1..=k {
                let prefix: Vec<usize> = (1..=i).collect();
                let (exits, a) = participating(&prefix, &alpha[..i]);
                if exits.is_empty() {
                    continue;
                }
                let phase = PhaseDef {
                    id: format!("prefix{i}"),
                    trainable: path_params(&model.spec, &exits),
                    exits,
                    alpha: a,
                    ge,
                };
                run(model, &phase, &mut log)?;
            }
        }
        RegimeKind::Alternating => {
            let rec = run_alternating(model, train, val, &alpha, ge, opts)?;
            log.phases.push(rec);
        }
        RegimeKind::MixedGradual => {
            for i in 1..=k {
                let suffix: Vec<usize> = (k - i + 1..=k).collect();
                let (exits, a) = participating(&suffix, &alpha[k - i..]);
                if exits.is_empty() {
                    continue;
                }
                let phase = PhaseDef {
                    id: format!("suffix{i}"),
                    trainable: path_params(&model.spec, &exits),
                    exits,
                    alpha: a,
                    ge,
                };
                run(model, &phase, &mut log)?;
            }
        }
    }
    Ok(log)
}
