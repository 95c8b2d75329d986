//! Desk-scale laboratory for training and analyzing multi-exit networks:
//! small dense backbones with a classifier head after selected blocks,
//! trained under interchangeable regimes and dissected with training-
//! dynamics instruments (gradient dominance, permutation-aligned mode
//! connectivity, activation rank, layer information content, loss
//! landscapes) plus a budgeted cost-accuracy evaluation protocol.
//!
//! Everything is `f64`, seeded, and deterministic: the same seed and
//! configuration reproduce training bit for bit. Recoverable failures are
//! [`error::Error`] values; panics indicate bugs in this crate.

pub mod analysis;
pub mod inference;
pub mod error;
pub mod exec;
pub mod multiexit;
pub mod numerics;
pub mod regimes;
pub mod workbench;

pub use error::{Error, Result};
