//! Seed derivation shared by every stochastic component.
//!
//! A run has one top-level seed. Trial `i` uses `trial_seed(seed, i)`, and
//! the components inside a trial (plant noise, grain field, initial pose)
//! draw from `stream_seed(trial_seed, stream)`. Both go through SplitMix64 so
//! neighbouring indices give unrelated streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under run seed `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index))
}

/// Named sub-stream of a trial seed.
pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    splitmix64(seed ^ (stream as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PlantNoise = 1,
    Grains = 2,
    InitialPose = 3,
    SensorNoise = 4,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
