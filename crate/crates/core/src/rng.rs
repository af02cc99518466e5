//! Seeded random streams.
//!
//! Every stochastic routine takes an externally owned generator. The
//! generator is ChaCha8 (`rand_chacha::ChaCha8Rng`); streams for individual
//! runs are derived from a base seed with the SplitMix64 finalizer so that
//! any run can be reproduced without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function (Steele, Lea & Flood).
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a base seed with a sequence of indices into a single 64-bit seed.
pub fn mix_seed(base: u64, indices: &[u64]) -> u64 {
    let mut state = splitmix64(base.wrapping_add(GOLDEN_GAMMA));
    for &i in indices {
        state = splitmix64(state ^ splitmix64(i.wrapping_add(GOLDEN_GAMMA)));
    }
    state
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for run `run` of a single-point study.
pub fn run_rng(base: u64, run: u64) -> SimRng {
    rng_from_seed(mix_seed(base, &[run]))
}

/// Generator for run `run` at grid point `point`.
pub fn point_run_rng(base: u64, point: u64, run: u64) -> SimRng {
    rng_from_seed(mix_seed(base, &[point, run]))
}
