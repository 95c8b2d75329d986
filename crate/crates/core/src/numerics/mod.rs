//! Tensor storage, reverse-mode autodiff, the optimizer, learning-rate
//! scheduling, seeded initialization, and gradient checking.

pub mod adamw;
pub mod check;
pub mod graph;
pub mod params;
pub mod rng;
pub mod schedule;
pub mod tensor;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use graph::{Graph, NodeId};
pub use params::Params;
pub use schedule::{lr_at, LrSchedule};
pub use tensor::Tensor;
