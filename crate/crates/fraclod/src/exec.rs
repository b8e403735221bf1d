//! Job execution helpers: data-parallel map with a sequential fallback.
//!
//! All callers collect results in input order and merge them sequentially
//! afterwards, so the outputs are bitwise identical with and without the
//! `parallel` feature.

#[cfg(feature = "parallel")]
pub(crate) fn run_jobs<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn run_jobs<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(|item| f(item)).collect()
}

/// Sequential variant, available regardless of the `parallel` feature.
pub(crate) fn run_jobs_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
