//! Training regimes for multi-exit models: the single-phase driver, loss
//! weighting and gradient rebalancing, per-exit early stopping, and the
//! seven phase compositions.

pub mod regime;
pub mod stop;
pub mod train;
pub mod weights;

pub use regime::{run_regime, RegimeKind, RegimeSpec, Scaling};
pub use stop::EarlyStopState;
pub use train::{
    eval_all_exits, final_exit_phase, head_params_of, joint_phase, participating, path_params,
    run_alternating, run_phase, run_phase1, run_phase2, run_phase3, EpochRecord, PhaseDef,
    PhaseRecord, TrainLog, TrainOptions, DIVERGENCE_LIMIT,
};
pub use weights::{ge_combine, loss_weights, LossWeighting};
