//! Seed derivation. Every random draw in the crate comes from a generator
//! seeded through these helpers so that runs are reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used to separate independent random streams of one run.
pub mod stream {
    pub const INIT: u64 = 0x1417;
    pub const SHUFFLE: u64 = 0x5a0f;
    pub const AUGMENT: u64 = 0xa06e;
    pub const ALPHA: u64 = 0xa1fa;
    pub const SELECT: u64 = 0x5e1e;
    pub const DPRIME: u64 = 0xd9e1;
    pub const COLLECT: u64 = 0xc011;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with an ordered list of tags into a new seed.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(base: u64, tags: &[u64]) -> Rng {
    rng(derive(base, tags))
}
