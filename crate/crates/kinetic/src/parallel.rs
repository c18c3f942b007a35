//! Worker pool over replicates and pool blocks.
//!
//! Work items draw from streams keyed by their index and results are
//! collected in index order, so output never depends on the worker count.

use kinetic_core::fixed_point::{PoolMap, POOL_BLOCK};
use kinetic_core::rng::Streams;
use rayon::prelude::*;

use crate::error::{KineticError, Result};

#[derive(Debug)]
pub struct Runner {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(KineticError::config("workers must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| KineticError::Pool(e.to_string()))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// `f(0), …, f(n − 1)` in index order.
    pub fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    /// One pool iteration with blocks spread over the workers.
    pub fn step_pool(&self, map: &PoolMap<'_>, prev: &[f64], streams: &Streams, iteration: u32) -> Vec<f64> {
        let mut next = vec![0.0; prev.len()];
        self.pool.install(|| {
            next.par_chunks_mut(POOL_BLOCK)
                .enumerate()
                .for_each(|(b, chunk)| map.step_block(prev, streams, iteration, b, chunk));
        });
        next
    }
}
