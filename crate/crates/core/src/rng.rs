//! Seed derivation.
//!
//! Every random stream in a simulation is keyed by a 64-bit seed derived from
//! a parent seed and an integer label through the SplitMix64 finalizer:
//!
//! ```text
//! child(parent, label) = mix(parent ^ mix(label + 0x9E3779B97F4A7C15))
//! ```
//!
//! Replicate `i` of a campaign uses `child(master_seed, i)`. Streams are
//! therefore independent of thread scheduling and of how many replicates run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for stream `label` under `parent`.
pub fn child_seed(parent: u64, label: u64) -> u64 {
    mix(parent ^ mix(label.wrapping_add(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream labels used inside a single trial.
pub mod label {
    pub const STAGE1: u64 = 1;
    pub const STAGE2: u64 = 2;
    pub const OUTCOMES: u64 = 0x100;
    pub const MCMC: u64 = 0x200;
    pub const ALLOCATION: u64 = 0x300;
    pub const ACCRUAL: u64 = 0x400;
}
