//! Seedable, splittable random number generation.
//!
//! Every stochastic routine takes its generator explicitly. Independent
//! streams for sweep cells or parallel chunks come from [`split_rng`], which
//! keeps the seed and selects a distinct ChaCha stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type VmfRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> VmfRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator seeded by `seed`.
pub fn split_rng(seed: u64, stream: u64) -> VmfRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
