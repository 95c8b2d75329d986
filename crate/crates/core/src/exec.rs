//! The crate's single concurrency seam.
//!
//! Embarrassingly parallel work (loss-surface grids, threshold sweeps,
//! per-sample exit simulation, multi-seed runs) is expressed as a map over
//! an index range. With the `parallel` feature (default) the map runs on
//! rayon's current thread pool; without it, sequentially. Results come
//! back in index order either way, so outputs are bit-identical across
//! both modes and any thread count.
//!
//! Training steps are *not* routed through here: a training trajectory is
//! a sequential recurrence and stays on one thread by construction.

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
///
/// `f` must be safe to call concurrently; results are ordered by index.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
///
/// `f` must be safe to call concurrently; results are ordered by index.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// The sequential fallback, available under every feature combination so
/// the two code paths can be compared directly (see `benches/parallel.rs`).
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
