//! Reproducible parallel Monte Carlo.
//!
//! Samples are cut into fixed blocks. Block `b` draws from the ChaCha stream
//! `b` under the run seed, so results do not depend on how many threads run
//! the blocks or in which order they finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Samples per block.
pub const BLOCK: usize = 256;

/// The generator for block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Splits `n_samples` into blocks and runs `f(rng, count)` on each, returning
/// the per-block results in block order. The first error in block order wins.
pub fn map_blocks<T, F>(seed: u64, n_samples: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync,
{
    let blocks = n_samples.div_ceil(BLOCK);
    let out: Vec<Result<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK.min(n_samples - b * BLOCK);
            f(&mut block_rng(seed, b as u64), count)
        })
        .collect();
    out.into_iter().collect()
}

/// Runs `f` on a dedicated pool of `workers` threads (`None` uses the global pool).
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::params("worker count must be positive")),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::params(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
