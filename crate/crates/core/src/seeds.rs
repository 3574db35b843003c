//! Seed derivation. Every stochastic stage draws from its own ChaCha stream
//! keyed by a base seed and a stage tag, so stages can be rerun in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags used when deriving sub-seeds.
pub mod tag {
    pub const LOCAL: u64 = 1;
    pub const KNOWLEDGE: u64 = 2;
    pub const ANCHORS: u64 = 3;
    pub const GLOBAL_VALIDATION: u64 = 4;
    pub const LANDMARKS: u64 = 5;
    pub const INIT: u64 = 6;
    pub const NOISE: u64 = 7;
    pub const TEST_LOCAL: u64 = 8;
    pub const TEST_GLOBAL: u64 = 9;
    pub const TRAIN: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically mixes a base seed with a stage tag.
pub fn derive(base: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(base) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
