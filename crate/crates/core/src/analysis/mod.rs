//! Instruments for studying trained models: gradient dominance,
//! weight-space matching and interpolation, representation rank, binned
//! mutual information, and loss-surface slices.

pub mod connectivity;
pub mod gd;
pub mod hungarian;
pub mod landscape;
pub mod mi;
pub mod permutation;
pub mod rank;

pub use connectivity::{
    interpolate_loss, lambda_grid, plane_axis, plane_loss, PathPoint, PlaneGrid,
    DEFAULT_PLANE_RESOLUTION,
};
pub use gd::{dominance_from_grads, gradient_dominance};
pub use hungarian::{hungarian, Assignment};
pub use landscape::{
    filter_normalized_direction, loss_landscape, LandscapeGrid, DEFAULT_LANDSCAPE_RESOLUTION,
};
pub use mi::{bin_patterns, mi_profile, pattern_entropy_bits, BlockMI, MIProfile, DEFAULT_MI_BINS};
pub use permutation::{
    apply_permutation, weight_match, Permutation, WeightMatch, MAX_MATCH_SWEEPS,
};
pub use rank::{
    numerical_rank, rank_profile, singular_values, BlockRank, RankProfile, DEFAULT_RANK_TOL,
};
