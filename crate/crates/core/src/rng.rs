//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose seed is derived
//! from `(seed, purpose tag, index)`. The derivation is a SplitMix64 chain over
//! the seed, an FNV-1a hash of the tag, and the index, so sub-streams are stable
//! across platforms and independent of the order in which they are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for the sub-stream `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ fnv1a(tag)) ^ index)
}

pub fn substream(seed: u64, tag: &str, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}
