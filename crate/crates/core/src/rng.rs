//! Seeded random streams.
//!
//! All sampling goes through [`ChaCha8Rng`] (rand_chacha 0.9). Replicate `i`
//! of a run with master seed `s` draws from `substream(s, i)`, so results do
//! not depend on how replicates are scheduled across threads.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replicate `index` under `master`.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1))))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

pub fn substream(master: u64, index: u64) -> StreamRng {
    seeded(substream_seed(master, index))
}
