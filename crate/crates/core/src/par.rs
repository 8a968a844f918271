//! Thin switch between rayon and sequential iteration.
//!
//! Every helper returns results in input order, so callers get identical
//! output whichever backend is compiled in and however many threads run.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Always sequential; the baseline the benches compare against.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Flat-maps each item into a vector and concatenates in input order.
#[cfg(feature = "parallel")]
pub fn flat_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T, &mut Vec<R>) + Sync + Send,
{
    items
        .par_iter()
        .fold(Vec::new, |mut acc, item| {
            f(item, &mut acc);
            acc
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        })
}

#[cfg(not(feature = "parallel"))]
pub fn flat_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T, &mut Vec<R>) + Sync + Send,
{
    let mut out = Vec::new();
    for item in items {
        f(item, &mut out);
    }
    out
}

#[cfg(feature = "parallel")]
pub fn sort_unstable<T: Ord + Send>(v: &mut [T]) {
    v.par_sort_unstable();
}

#[cfg(not(feature = "parallel"))]
pub fn sort_unstable<T: Ord + Send>(v: &mut [T]) {
    v.sort_unstable();
}

/// Number of worker threads the parallel backend will use (1 without it).
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers.
///
/// Without the `parallel` feature the thread count is ignored.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
