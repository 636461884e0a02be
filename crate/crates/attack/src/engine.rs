//! Seeded, chunked Monte Carlo. Trials are split into fixed-size chunks and
//! chunk `c` draws from stream `c` of a ChaCha20 generator keyed by the run
//! seed, so the result depends only on the seed and trial count, never on
//! how rayon schedules the chunks.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

pub const CHUNK_TRIALS: u64 = 2048;

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunks(trials: u64) -> impl IndexedParallelIterator<Item = (u64, Range<u64>)> {
    let count = usize::try_from(trials.div_ceil(CHUNK_TRIALS)).expect("chunk count fits in usize");
    (0..count).into_par_iter().map(move |c| {
        let c = c as u64;
        (c, c * CHUNK_TRIALS..((c + 1) * CHUNK_TRIALS).min(trials))
    })
}

/// Runs `chunk(rng, trial_range)` over every chunk and sums the counts.
pub fn count<E, F>(trials: u64, seed: u64, chunk: F) -> Result<u64, E>
where
    E: Send,
    F: Fn(&mut ChaCha20Rng, Range<u64>) -> Result<u64, E> + Sync,
{
    chunks(trials)
        .map(|(c, range)| chunk(&mut chunk_rng(seed, c), range))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Like [`count`] for a fixed-length vector of counters, summed
/// element-wise.
pub fn count_vec<E, F>(trials: u64, seed: u64, len: usize, chunk: F) -> Result<Vec<u64>, E>
where
    E: Send,
    F: Fn(&mut ChaCha20Rng, Range<u64>) -> Result<Vec<u64>, E> + Sync,
{
    chunks(trials)
        .map(|(c, range)| chunk(&mut chunk_rng(seed, c), range))
        .try_reduce(
            || vec![0; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}
