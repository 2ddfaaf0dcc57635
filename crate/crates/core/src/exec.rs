//! Replica-level execution: rayon when the `parallel` feature is on, a plain
//! loop otherwise. Results always come back in index order.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Map `f` over `range`, collecting in index order.
pub fn map_range<T, F>(range: Range<u64>, mode: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match mode {
        Execution::Sequential => range.map(f).collect(),
        Execution::Parallel => par_map(range, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    range.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    range.map(f).collect()
}

/// Run `job` on a pool of `threads` workers (ignored without `parallel`).
pub fn with_threads<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool");
            return pool.install(job);
        }
    }
    let _ = threads;
    job()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
