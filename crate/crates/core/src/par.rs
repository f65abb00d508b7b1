//! Data-parallel building blocks.
//!
//! With the `parallel` feature (default) these fan out over the global rayon
//! pool. Without it they run the same closures sequentially in index order.
//! Every caller writes into disjoint outputs or collects in index order, so the
//! results are bit-identical between the two builds and across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Work below this many multiply-adds is not worth splitting.
pub const MIN_PARALLEL_WORK: usize = 1 << 15;

/// `f(i)` for `i in 0..n`, collected in index order.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// `f(item)` for every item, collected in order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Calls `f(row_index, row)` on each `row_len`-sized chunk of `data`.
/// Runs sequentially when `work` is below [`MIN_PARALLEL_WORK`].
#[cfg(feature = "parallel")]
pub fn for_each_row<F>(data: &mut [f64], row_len: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    if work < MIN_PARALLEL_WORK || rayon::current_num_threads() == 1 {
        data.chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, r)| f(i, r));
    } else {
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, r)| f(i, r));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row<F>(data: &mut [f64], row_len: usize, _work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, r)| f(i, r));
}

/// Whether this build fans work out to multiple threads.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
