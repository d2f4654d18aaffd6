//! Stable seed derivation.
//!
//! Seeds are folded through SplitMix64 so any single call, thread, or sweep
//! point can be reproduced in isolation from its coordinates. The mixing is
//! fixed here rather than delegated to `std::hash`, whose output is allowed
//! to change between releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds an ordered list of words into one seed.
pub fn derive(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(GOLDEN, |acc, &part| splitmix64(acc ^ splitmix64(part)))
}

/// FNV-1a over UTF-8 bytes, for folding identifiers into [`derive`].
pub fn hash_str(text: &str) -> u64 {
    text.bytes().fold(0xCBF2_9CE4_8422_2325, |acc, b| {
        (acc ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Domain tags keep seeds for different purposes apart.
pub mod tag {
    pub const GENERATION: u64 = 1;
    pub const VERIFICATION: u64 = 2;
    pub const REFINEMENT: u64 = 3;
    pub const FEEDBACK_CHOICE: u64 = 4;
    pub const SELECTION: u64 = 5;
    pub const RUN: u64 = 6;
    pub const SWEEP: u64 = 7;
}
