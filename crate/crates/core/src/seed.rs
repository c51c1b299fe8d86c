//! Seed derivation shared by every randomized component.
//!
//! All randomness in the crate flows from 64-bit seeds that are combined
//! with [`mix`] and expanded into a [`ChaCha8Rng`] stream. Two components
//! never share a stream unless they were handed the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a single seed.
///
/// The length of the input participates in the hash, so `mix(&[a, b])`
/// and `mix(&[a, b, 0])` differ.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = splitmix64(parts.len() as u64);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
