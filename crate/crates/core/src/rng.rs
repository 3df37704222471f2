//! Seed derivation for schedule-independent random streams.
//!
//! Every random draw in the filter comes from a stream keyed by
//! (root seed, stage, cycle, slot), so results do not depend on how particle
//! work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `root`, one mixing round per part.
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(root), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn stream(root: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, parts))
}
