//! Order-preserving map helpers that run on rayon when the `parallel`
//! feature is enabled and fall back to plain iterators otherwise.
//!
//! Every helper returns results in input order, so callers that reduce the
//! output sequentially get bit-identical sums for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over a slice, preserving order.
#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Map `f` over `0..n`, preserving order.
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
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Apply `f` to fixed-size mutable chunks of `data`.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Whether the crate was built with the rayon backend.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
