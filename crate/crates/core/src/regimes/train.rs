//! The single-phase training driver all regimes are composed from.
//!
//! One phase = one objective (a weighted set of exits), one trainable
//! parameter set, one fresh AdamW state, and one restart of the cosine
//! learning-rate schedule. The driver shuffles with a counter-based
//! stream keyed by (seed, global epoch), so a run is reproducible
//! bit-for-bit regardless of thread count, and regimes whose phases
//! degenerate to the same objective see the same data order and hence
//! the same trajectory.
//!
//! Freezing is structural, not numerical: parameters outside the phase's
//! trainable set are never handed to the optimizer, so neither gradients
//! nor weight decay can touch them.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::analysis::gd::gradient_dominance;
use crate::error::{Error, Result};
use crate::multiexit::model::{metric_of, Labels, ModelSpec, MultiExitModel};
use crate::numerics::adamw::{adamw_step, AdamWConfig, AdamWState};
use crate::numerics::graph::NodeId;
use crate::numerics::rng::named_rng;
use crate::numerics::schedule::{lr_at, LrSchedule};
use crate::numerics::tensor::Tensor;
use crate::regimes::stop::EarlyStopState;
use crate::regimes::weights::ge_combine;

/// A phase aborts once its per-step objective exceeds this value (or
/// stops being finite).
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Knobs shared by every phase of a run.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Epoch budget per phase.
    pub max_epochs: usize,
    /// Early-stop patience: consecutive epochs in which no tracked exit
    /// improves before the phase ends.
    pub patience: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub adamw: AdamWConfig,
    /// Seed for the per-epoch shuffle streams.
    pub shuffle_seed: u64,
    /// Probe gradient dominance every this many epochs (0 disables).
    pub gd_every: usize,
    /// Sample cap for the dominance probe batch.
    pub gd_probe: usize,
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidParameter("patience must be >= 1".into()));
        }
        self.adamw.validate()
    }
}

/// One phase: an objective over some exits plus the parameter set allowed
/// to move.
#[derive(Debug, Clone)]
pub struct PhaseDef {
    /// Stable id recorded in the log (and CSV phase column).
    pub id: String,
    /// Participating exits, 1-based, strictly increasing.
    pub exits: Vec<usize>,
    /// Weight per participating exit (same length as `exits`).
    pub alpha: Vec<f64>,
    /// Combine per-exit gradients by per-block averaging instead of the
    /// weighted sum.
    pub ge: bool,
    /// Names of the parameters the optimizer may update.
    pub trainable: Vec<String>,
}

/// Everything blocks `1..=deepest placement` plus the heads of `exits`:
/// the parameters the given exits' forward paths actually touch.
pub fn path_params(spec: &ModelSpec, exits: &[usize]) -> Vec<String> {
    let deepest = exits
        .iter()
        .map(|&k| spec.placements[k - 1])
        .max()
        .expect("exits must be nonempty");
    let mut names = Vec::new();
    for b in 1..=deepest {
        names.extend(spec.block_params(b));
    }
    for &k in exits {
        names.extend(spec.head_params(k));
    }
    names
}

/// Head parameters of the given exits only (frozen-backbone phases).
pub fn head_params_of(spec: &ModelSpec, exits: &[usize]) -> Vec<String> {
    exits.iter().flat_map(|&k| spec.head_params(k)).collect()
}

/// Drops exits whose weight is zero; the remaining pairs define the
/// objective actually optimized.
pub fn participating(exits: &[usize], alpha: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut e = Vec::new();
    let mut a = Vec::new();
    for (&k, &w) in exits.iter().zip(alpha) {
        if w != 0.0 {
            e.push(k);
            a.push(w);
        }
    }
    (e, a)
}

/// Phase training the backbone through the final exit alone.
pub fn final_exit_phase(spec: &ModelSpec) -> PhaseDef {
    let k = spec.num_exits();
    PhaseDef {
        id: "final".into(),
        exits: vec![k],
        alpha: vec![1.0],
        ge: false,
        trainable: path_params(spec, &[k]),
    }
}

/// Phase jointly training the weighted multi-exit objective. Zero-weight
/// exits are detached entirely; with `frozen_backbone` only the
/// participating heads may move.
pub fn joint_phase(
    spec: &ModelSpec,
    alpha_full: &[f64],
    ge: bool,
    frozen_backbone: bool,
    id: &str,
) -> Result<PhaseDef> {
    let k = spec.num_exits();
    if alpha_full.len() != k {
        return Err(Error::LayoutMismatch(format!(
            "{} loss weights for {k} exits",
            alpha_full.len()
        )));
    }
    let all: Vec<usize> = (1..=k).collect();
    let (exits, alpha) = participating(&all, alpha_full);
    if exits.is_empty() {
        return Err(Error::InvalidParameter("all exit weights are zero".into()));
    }
    let trainable = if frozen_backbone {
        head_params_of(spec, &exits)
    } else {
        path_params(spec, &exits)
    };
    Ok(PhaseDef {
        id: id.into(),
        exits,
        alpha,
        ge,
        trainable,
    })
}

/// One epoch's row in the log.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    /// Global epoch index, strictly increasing across phases.
    pub epoch: usize,
    /// Mean per-step objective value over the epoch.
    pub train_loss: f64,
    /// Learning rate at the epoch's last step.
    pub lr: f64,
    /// Validation metric of every exit (not just participating ones).
    pub val_metrics: Vec<f64>,
    pub wall_secs: f64,
    /// Gradient dominance per participating exit, on probe epochs.
    pub dominance: Option<Vec<f64>>,
}

/// Everything one phase did.
#[derive(Debug, Clone)]
pub struct PhaseRecord {
    pub id: String,
    pub exits: Vec<usize>,
    pub epochs: Vec<EpochRecord>,
    pub steps: usize,
    pub stopped_early: bool,
    /// For the per-step alternating driver: (final-objective steps,
    /// joint-objective steps).
    pub alternation: Option<(usize, usize)>,
}

/// Append-only record of a whole regime run.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub phases: Vec<PhaseRecord>,
}

impl TrainLog {
    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs.len()).sum()
    }

    pub fn total_steps(&self) -> usize {
        self.phases.iter().map(|p| p.steps).sum()
    }

    /// Validation metrics of all exits after the last epoch run.
    pub fn final_val_metrics(&self) -> Option<&[f64]> {
        self.phases
            .iter()
            .rev()
            .find_map(|p| p.epochs.last())
            .map(|e| e.val_metrics.as_slice())
    }
}

fn check_data(x: &Tensor, y: &Labels, what: &str) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::InvalidParameter(format!("{what} split is empty")));
    }
    if x.rows() != y.len() {
        return Err(Error::LayoutMismatch(format!(
            "{what} split: {} rows vs {} labels",
            x.rows(),
            y.len()
        )));
    }
    Ok(())
}

fn validate_phase(model: &MultiExitModel, phase: &PhaseDef) -> Result<()> {
    if phase.alpha.len() != phase.exits.len() {
        return Err(Error::LayoutMismatch(format!(
            "phase {}: {} weights for {} exits",
            phase.id,
            phase.alpha.len(),
            phase.exits.len()
        )));
    }
    for &a in &phase.alpha {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "phase {}: loss weights must be finite and >= 0",
                phase.id
            )));
        }
    }
    if phase.trainable.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "phase {}: nothing to train",
            phase.id
        )));
    }
    for name in &phase.trainable {
        if !model.params.contains_key(name) {
            return Err(Error::UnknownParam(name.clone()));
        }
    }
    Ok(())
}

/// Computes this step's gradients for the phase objective.
fn phase_grads(
    model: &MultiExitModel,
    phase: &PhaseDef,
    graph: &crate::multiexit::model::ModelGraph,
) -> Result<crate::numerics::params::Params> {
    if phase.ge {
        let mut per_exit = Vec::with_capacity(graph.losses.len());
        for &loss in &graph.losses {
            per_exit.push(graph.graph.grad_weighted(&[(loss, 1.0)], &phase.trainable)?);
        }
        ge_combine(&model.spec, &phase.exits, &per_exit, &phase.trainable)
    } else {
        let roots: Vec<(NodeId, f64)> = graph
            .losses
            .iter()
            .copied()
            .zip(phase.alpha.iter().copied())
            .collect();
        graph.graph.grad_weighted(&roots, &phase.trainable)
    }
}

/// Weighted objective value of the already-forwarded graph, checked
/// against the divergence limit.
fn objective_value(
    phase: &PhaseDef,
    graph: &crate::multiexit::model::ModelGraph,
    epoch: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (j, &loss) in graph.losses.iter().enumerate() {
        total += phase.alpha[j] * graph.graph.value(loss)?.item();
    }
    if !total.is_finite() || total > DIVERGENCE_LIMIT {
        return Err(Error::Divergence(format!(
            "objective {total:.3e} in phase {} at epoch {epoch}",
            phase.id
        )));
    }
    Ok(total)
}

fn forward_for_training(
    graph: &mut crate::multiexit::model::ModelGraph,
    bindings: &crate::numerics::params::Params,
    phase_id: &str,
    epoch: usize,
) -> Result<()> {
    match graph.graph.forward(bindings) {
        Err(Error::NonFinite { .. }) => Err(Error::Divergence(format!(
            "non-finite activation in phase {phase_id} at epoch {epoch}"
        ))),
        other => other,
    }
}

/// Validation metrics of every exit under the current parameters.
pub fn eval_all_exits(model: &MultiExitModel, x: &Tensor, y: &Labels) -> Result<Vec<f64>> {
    let out = model.forward_all(x, false)?;
    out.logits
        .iter()
        .map(|l| metric_of(&model.spec.task, l, y))
        .collect()
}

/// Runs one phase to its epoch budget or early stop, updating the model
/// in place. `epoch_offset` keeps logged epoch numbers globally
/// increasing when phases are chained.
pub fn run_phase(
    model: &mut MultiExitModel,
    phase: &PhaseDef,
    train: (&Tensor, &Labels),
    val: (&Tensor, &Labels),
    opts: &TrainOptions,
    epoch_offset: usize,
) -> Result<PhaseRecord> {
    opts.validate()?;
    validate_phase(model, phase)?;
    check_data(train.0, train.1, "train")?;
    check_data(val.0, val.1, "validation")?;

    let mut graph = model.build_graph(&phase.exits, true)?;
    let mut opt = AdamWState::new(opts.adamw)?;
    let mut stop = EarlyStopState::new(
        phase.exits.len(),
        opts.patience,
        model.spec.task.higher_is_better(),
    )?;

    let n = train.0.rows();
    let batches = n.div_ceil(opts.batch_size);
    let mut record = PhaseRecord {
        id: phase.id.clone(),
        exits: phase.exits.clone(),
        epochs: Vec::new(),
        steps: 0,
        stopped_early: false,
        alternation: None,
    };

    let mut step = 0usize;
    for e in 0..opts.max_epochs {
        let t0 = Instant::now();
        let epoch = epoch_offset + e;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = named_rng(opts.shuffle_seed, &format!("shuffle/{epoch}"));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut last_lr = 0.0;
        for b in 0..batches {
            let lo = b * opts.batch_size;
            let hi = n.min(lo + opts.batch_size);
            let idx = &order[lo..hi];
            let xb = train.0.gather_rows(idx);
            let yb = train.1.gather(idx);
            let bindings = model.bindings(&xb, Some(&yb))?;
            forward_for_training(&mut graph, &bindings, &phase.id, epoch)?;
            loss_sum += objective_value(phase, &graph, epoch)?;
            let grads = phase_grads(model, phase, &graph)?;
            let lr = lr_at(&opts.lr, step);
            adamw_step(&mut opt, &mut model.params, &grads, lr)?;
            last_lr = lr;
            step += 1;
        }

        let val_metrics = eval_all_exits(model, val.0, val.1)?;
        let dominance = if opts.gd_every > 0 && e % opts.gd_every == 0 {
            let m = n.min(opts.gd_probe.max(1));
            let idx: Vec<usize> = (0..m).collect();
            let px = train.0.gather_rows(&idx);
            let py = train.1.gather(&idx);
            Some(gradient_dominance(model, &phase.exits, &phase.alpha, &px, &py)?)
        } else {
            None
        };

        let tracked: Vec<f64> = phase.exits.iter().map(|&k| val_metrics[k - 1]).collect();
        let stop_now = stop.update(&tracked)?;
        record.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            lr: last_lr,
            val_metrics,
            wall_secs: t0.elapsed().as_secs_f64(),
            dominance,
        });
        if stop_now {
            record.stopped_early = true;
            break;
        }
    }
    record.steps = step;
    Ok(record)
}

/// Trains the backbone and final head only (single-exit objective).
pub fn run_phase1(
    model: &mut MultiExitModel,
    train: (&Tensor, &Labels),
    val: (&Tensor, &Labels),
    opts: &TrainOptions,
) -> Result<PhaseRecord> {
    run_phase(model, &final_exit_phase(&model.spec), train, val, opts, 0)
}

/// Trains backbone and heads jointly under the weighted objective.
pub fn run_phase2(
    model: &mut MultiExitModel,
    train: (&Tensor, &Labels),
    val: (&Tensor, &Labels),
    alpha: &[f64],
    ge: bool,
    opts: &TrainOptions,
) -> Result<PhaseRecord> {
    let phase = joint_phase(&model.spec, alpha, ge, false, "joint")?;
    run_phase(model, &phase, train, val, opts, 0)
}

/// Trains all heads on a frozen backbone.
pub fn run_phase3(
    model: &mut MultiExitModel,
    train: (&Tensor, &Labels),
    val: (&Tensor, &Labels),
    alpha: &[f64],
    opts: &TrainOptions,
) -> Result<PhaseRecord> {
    let phase = joint_phase(&model.spec, alpha, false, true, "heads")?;
    run_phase(model, &phase, train, val, opts, 0)
}

/// Per-step alternation between the final-exit objective and the joint
/// objective, sharing one optimizer (and its step count) across both.
/// Even steps take the final-exit objective, odd steps the joint one.
pub fn run_alternating(
    model: &mut MultiExitModel,
    train: (&Tensor, &Labels),
    val: (&Tensor, &Labels),
    alpha_full: &[f64],
    ge: bool,
    opts: &TrainOptions,
) -> Result<PhaseRecord> {
    opts.validate()?;
    check_data(train.0, train.1, "train")?;
    check_data(val.0, val.1, "validation")?;

    let final_def = final_exit_phase(&model.spec);
    let mut joint_def = joint_phase(&model.spec, alpha_full, ge, false, "alternating")?;
    joint_def.id = "alternating".into();
    validate_phase(model, &final_def)?;
    validate_phase(model, &joint_def)?;

    let mut final_graph = model.build_graph(&final_def.exits, true)?;
    let mut joint_graph = model.build_graph(&joint_def.exits, true)?;
    // One optimizer for both objectives: moment buffers and the step
    // count persist across the alternation.
    let mut opt = AdamWState::new(opts.adamw)?;
    let mut stop = EarlyStopState::new(
        joint_def.exits.len(),
        opts.patience,
        model.spec.task.higher_is_better(),
    )?;

    let n = train.0.rows();
    let batches = n.div_ceil(opts.batch_size);
    let mut record = PhaseRecord {
        id: "alternating".into(),
        exits: joint_def.exits.clone(),
        epochs: Vec::new(),
        steps: 0,
        stopped_early: false,
        alternation: Some((0, 0)),
    };

    let mut step = 0usize;
    let mut final_steps = 0usize;
    let mut joint_steps = 0usize;
    for e in 0..opts.max_epochs {
        let t0 = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = named_rng(opts.shuffle_seed, &format!("shuffle/{e}"));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut last_lr = 0.0;
        for b in 0..batches {
            let lo = b * opts.batch_size;
            let hi = n.min(lo + opts.batch_size);
            let idx = &order[lo..hi];
            let xb = train.0.gather_rows(idx);
            let yb = train.1.gather(idx);
            let bindings = model.bindings(&xb, Some(&yb))?;
            let (phase, graph) = if step % 2 == 0 {
                final_steps += 1;
                (&final_def, &mut final_graph)
            } else {
                joint_steps += 1;
                (&joint_def, &mut joint_graph)
            };
            forward_for_training(graph, &bindings, "alternating", e)?;
            loss_sum += objective_value(phase, graph, e)?;
            let grads = phase_grads(model, phase, graph)?;
            let lr = lr_at(&opts.lr, step);
            adamw_step(&mut opt, &mut model.params, &grads, lr)?;
            last_lr = lr;
            step += 1;
        }

        let val_metrics = eval_all_exits(model, val.0, val.1)?;
        let dominance = if opts.gd_every > 0 && e % opts.gd_every == 0 {
            let m = n.min(opts.gd_probe.max(1));
            let idx: Vec<usize> = (0..m).collect();
            let px = train.0.gather_rows(&idx);
            let py = train.1.gather(&idx);
            Some(gradient_dominance(model, &joint_def.exits, &joint_def.alpha, &px, &py)?)
        } else {
            None
        };

        let tracked: Vec<f64> = joint_def.exits.iter().map(|&k| val_metrics[k - 1]).collect();
        let stop_now = stop.update(&tracked)?;
        record.epochs.push(EpochRecord {
            epoch: e,
            train_loss: loss_sum / batches as f64,
            lr: last_lr,
            val_metrics,
            wall_secs: t0.elapsed().as_secs_f64(),
            dominance,
        });
        if stop_now {
            record.stopped_early = true;
            break;
        }
    }
    record.steps = step;
    record.alternation = Some((final_steps, joint_steps));
    Ok(record)
}
