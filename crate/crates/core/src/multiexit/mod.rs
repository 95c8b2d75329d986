//! The multi-exit model family: dense ReLU backbones with heads attached
//! at chosen depths, their loss composition, and their exact FLOP cost
//! accounting.

pub mod cost;
pub mod model;
pub mod placement;

pub use cost::{cost_model, dense_flops, CostModel};
pub use model::{
    argmax_rows, build_model, metric_of, target_tensor, ExitOutputs, HeadShape, Labels,
    ModelGraph, ModelSpec, MultiExitModel, Task, INPUT_LEAF, TARGET_LEAF,
};
pub use placement::PlacementScheme;
