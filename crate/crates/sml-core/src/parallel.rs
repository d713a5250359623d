//! Data-parallel map helpers.
//!
//! Hot loops (per-sample forward/backward, per-pixel classification) map a
//! pure function over an index range. With the `parallel` feature (default)
//! the map runs on the rayon pool; without it the same code runs
//! sequentially. Results come back ordered by index, and callers reduce
//! them in fixed left-to-right order, so outputs are bitwise identical in
//! both modes and for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn maybe_par_map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, in parallel when the `parallel` feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn maybe_par_map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    seq_map_indices(n, f)
}

/// Always-sequential map over `0..n`; the comparison point for benches.
pub fn seq_map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}
