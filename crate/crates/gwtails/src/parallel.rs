//! Rayon-backed executor.

use std::ops::Range;

use gwtails_core::exec::{chunks, Executor};
use rayon::prelude::*;

/// Runs chunks on a dedicated thread pool. Results come back in chunk order,
/// so every reduction matches [`gwtails_core::exec::Sequential`] bit for bit.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// A pool with `workers` threads; 0 means one per logical core.
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let workers = if workers == 0 { default_workers() } else { workers };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Parallel { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Executor for Parallel {
    fn map_chunks<T, F>(&self, len: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync,
    {
        let ranges: Vec<Range<u64>> = chunks(len).collect();
        self.pool.install(|| ranges.into_par_iter().map(&f).collect())
    }
}
