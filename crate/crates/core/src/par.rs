//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run the same closures sequentially, so results
//! are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, in parallel when enabled. Output order is
/// always index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Splits `len` items into contiguous chunks and folds each with `fold`,
/// then combines the per-chunk accumulators in chunk order with `merge`.
#[cfg(feature = "parallel")]
pub(crate) fn fold_chunks<A, I, F, M>(len: usize, chunk: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, std::ops::Range<usize>) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks = len.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| fold(init(), c * chunk..((c + 1) * chunk).min(len)))
        .reduce(&init, &merge)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn fold_chunks<A, I, F, M>(len: usize, chunk: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, std::ops::Range<usize>) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let _ = (chunk, &merge);
    fold(init(), 0..len)
}

pub(crate) fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
