//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator keyed
//! by a 64-bit seed and a 64-bit stream id. Independent pieces of work (rows
//! of a sampled adjacency matrix, Monte Carlo trials, K-means restarts) get
//! distinct stream ids, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream id offsets, one per consumer.
pub mod purpose {
    pub const SAMPLE_ROW: u64 = 0;
    pub const SHUFFLE: u64 = 1 << 40;
    pub const KMEANS: u64 = 2 << 40;
    pub const LANCZOS: u64 = 3 << 40;
    pub const SUBSPACE: u64 = 4 << 40;
    pub const CONJECTURE: u64 = 5 << 40;
    pub const MISC: u64 = 6 << 40;
}

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives the seed of child `index` (trial, restart, grid point) from a
/// parent seed with a splitmix64 finaliser.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
