//! Seeded RNG streams.
//!
//! Every source of randomness in the crate is a ChaCha8 stream keyed by a
//! `(seed, stream)` pair. Worker shards of a Monte-Carlo budget use
//! consecutive stream ids, so results are deterministic for a fixed worker
//! count and independent across shards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Stream = ChaCha8Rng;

/// Independent RNG stream for `(seed, stream_id)`.
pub fn stream(seed: u64, stream_id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// One standard Gaussian vector of length `dim`.
pub fn gaussian_vector(rng: &mut Stream, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Splits `total` Monte-Carlo samples across `workers` shards; shard `i`
/// draws from stream `base_stream + i`. The per-shard closure returns a
/// vector of accumulators which are summed in shard order.
pub fn sharded_sum<F>(
    seed: u64,
    base_stream: u64,
    total: usize,
    workers: usize,
    width: usize,
    f: F,
) -> Vec<f64>
where
    F: Fn(&mut Stream, usize) -> Vec<f64> + Sync,
{
    let workers = workers.max(1);
    let per = total / workers;
    let rem = total % workers;
    let shard_sizes: Vec<usize> = (0..workers).map(|i| per + usize::from(i < rem)).collect();
    let mut acc = vec![0.0; width];
    if workers == 1 {
        let mut rng = stream(seed, base_stream);
        return f(&mut rng, total);
    }
    let results: Vec<Vec<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = shard_sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let f = &f;
                scope.spawn(move || {
                    let mut rng = stream(seed, base_stream + i as u64);
                    f(&mut rng, n)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("shard panicked"))
            .collect()
    });
    for shard in results {
        for (a, v) in acc.iter_mut().zip(shard) {
            *a += v;
        }
    }
    acc
}
