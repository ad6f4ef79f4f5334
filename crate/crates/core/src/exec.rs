//! Execution strategy for the data-parallel inner loops.
//!
//! Every parallel path in the crate goes through the helpers here. With the
//! `parallel` feature disabled, [`Exec::Parallel`] silently runs sequentially,
//! so callers never need their own `cfg` switches. Work is always split into
//! fixed-size chunks whose results are merged in chunk order, which keeps
//! floating-point reductions bit-identical between the two strategies.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when this strategy will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over consecutive chunks of `chunk_size` items, preserving
    /// chunk order. Chunk boundaries depend only on `chunk_size`, never on the
    /// number of worker threads.
    pub fn map_chunks<T, U, F>(self, items: &[T], chunk_size: usize, f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&[T]) -> U + Sync + Send,
    {
        let chunk_size = chunk_size.max(1);
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_chunks(chunk_size).map(f).collect();
        }
        items.chunks(chunk_size).map(f).collect()
    }
}

/// Caps the global worker pool. Returns an error string if the pool was
/// already initialised. A no-op without the `parallel` feature.
pub fn set_thread_cap(threads: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}
