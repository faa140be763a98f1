//! Data-parallel helpers.
//!
//! With the `parallel` feature every helper fans out over rayon's global
//! pool; without it (or after [`set_sequential`]) the same closures run in a
//! plain loop. Results are always collected in index order and reductions
//! are folded left to right over fixed chunks, so output bits do not depend
//! on the execution mode or the thread count.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path even when the `parallel` feature is enabled.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Map over `items`, possibly in parallel, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Split `0..n` into consecutive chunks of `chunk` indices, evaluate each
/// chunk (possibly in parallel) and fold the partial results in chunk order.
pub fn chunked_fold<T, F, G>(n: usize, chunk: usize, eval: F, init: T, combine: G) -> T
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    G: FnMut(T, T) -> T,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let parts = map_indexed(n_chunks, |c| eval(c * chunk..((c + 1) * chunk).min(n)));
    parts.into_iter().fold(init, combine)
}
