//! Row/item parallelism that degrades to plain iteration without the
//! `parallel` feature. Output order never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f` for every index in `0..n` and concatenates the results in index order.
pub(crate) fn flat_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> Vec<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let parts: Vec<Vec<T>> = (0..n).into_par_iter().map(f).collect();
        parts.into_iter().flatten().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).flat_map(f).collect()
    }
}

pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
