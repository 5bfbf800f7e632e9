//! Chunked map over slices, backed by rayon when the `parallel` feature is on.
//!
//! Work is always split into the same fixed-size chunks and results come back
//! in chunk order, so any reduction the caller performs over them is
//! independent of the thread count and of whether rayon is compiled in.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default number of items per shard for corpus-level work.
pub const SHARD_SIZE: usize = 2048;

/// Applies `f` to consecutive `chunk`-sized slices of `items`, returning one
/// result per chunk in order.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(chunk).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(chunk).map(f).collect()
    }
}

/// Order-preserving element-wise map.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sizes the global worker pool. `None` keeps the default of one worker per
/// core. Only the first call in a process takes effect.
pub fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads.is_some_and(|n| n > 1) {
        log::warn!("built without the `parallel` feature; running single-threaded");
    }
}

/// Worker count in use.
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

/// True when this build dispatches work to rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
