//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`SimRng`], which is
//! `ChaCha8Rng` from `rand_chacha`, seeded through `SeedableRng::seed_from_u64`.
//! The ChaCha stream is specified independently of platform and word size,
//! so a seed reproduces the same symbols everywhere.
//!
//! Independent streams (one per trial, per codeword, per search restart) are
//! keyed by mixing the base seed with a path of integers via SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a path of stream identifiers.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn derived_rng(base: u64, path: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(base, path))
}
