//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run as plain iterators. Every closure is
//! evaluated independently per index, so results do not depend on the number
//! of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Whether the crate was built with rayon support.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
