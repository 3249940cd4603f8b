//! Deterministic fan-out over replica indices.
//!
//! Work over `0..len` is cut into fixed chunks of [`CHUNK`] indices. An
//! executor evaluates chunks in any order it likes but returns their results
//! in chunk order, so any reduction the caller performs afterwards is
//! independent of the executor and the number of workers.

use alloc::vec::Vec;
use core::ops::Range;

/// Number of replica indices per chunk.
pub const CHUNK: u64 = 4096;

pub trait Executor: Sync {
    /// Evaluates `f` on consecutive chunks covering `0..len`, returning the
    /// results in chunk order.
    fn map_chunks<T, F>(&self, len: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync;
}

/// Runs every chunk on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_chunks<T, F>(&self, len: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync,
    {
        chunks(len).map(f).collect()
    }
}

/// The chunk ranges covering `0..len`.
pub fn chunks(len: u64) -> impl Iterator<Item = Range<u64>> + Clone {
    let count = len.div_ceil(CHUNK);
    (0..count).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(len))
}
