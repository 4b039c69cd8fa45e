//! Seed derivation. Every stochastic stage draws from its own ChaCha stream
//! of the root seed, so stages stay reproducible independently of each
//! other and of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const LOUVAIN: u64 = 1;
pub const KMEANS: u64 = 2;
pub const SYNTH: u64 = 3;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for one k-means restart of one `k` within a sweep.
pub fn kmeans_stream(k: usize, restart: usize) -> u64 {
    (KMEANS << 48) | ((k as u64 & 0xffff_ffff) << 16) | (restart as u64 & 0xffff)
}
