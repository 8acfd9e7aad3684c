//! Seed splitting.
//!
//! Every random stream in the crate is derived from a single root seed with
//! `stream_seed(seed, index) = splitmix64(seed ^ splitmix64(index))`, so
//! parallel workers draw from independent, reproducible streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn stream_rng(seed: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, index))
}
