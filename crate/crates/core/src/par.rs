//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) the work runs on rayon, optionally
//! capped by the `GCNNVC_THREADS` environment variable; without it, or with
//! an explicit [`Parallelism::Sequential`], the same closure runs in a plain
//! loop. Callers only use order-independent reductions over the results, so
//! both modes produce identical output.

/// Execution mode for enumeration-heavy verifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Parallelism::Rayon
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Parallelism::Sequential
    }
}

#[cfg(feature = "parallel")]
fn thread_pool() -> Option<&'static rayon::ThreadPool> {
    use std::sync::OnceLock;
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads: usize = std::env::var("GCNNVC_THREADS").ok()?.parse().ok()?;
        rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().ok()
    })
    .as_ref()
}

/// Applies `op` to every index in `0..n` and collects the results in index
/// order.
pub(crate) fn indexed_map<T, F>(mode: Parallelism, n: usize, op: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..n).map(op).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            let run = || (0..n).into_par_iter().map(&op).collect();
            match thread_pool() {
                Some(pool) => pool.install(run),
                None => run(),
            }
        }
    }
}
