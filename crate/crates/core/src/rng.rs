//! Seed derivation and random streams.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit key. Keys for sub-streams are derived with [`mix`], a splitmix64
//! finalizer folded over the key parts, so results depend only on the keys
//! and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into a single 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags.
pub(crate) const TAG_TRUTH: u64 = 1;
pub(crate) const TAG_SAMPLE: u64 = 2;
pub(crate) const TAG_PILOT: u64 = 3;
pub(crate) const TAG_EVAL: u64 = 4;
