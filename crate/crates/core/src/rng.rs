//! Deterministic RNG streams.
//!
//! Every stochastic component draws from a stream derived from the user seed
//! and a fixed tag path, so results never depend on thread count or on the
//! order in which parallel work items complete.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tags that keep streams of different components disjoint.
pub mod tag {
    pub const RAREFY: u64 = 0x11;
    pub const SIM_ROW: u64 = 0x21;
    pub const SIM_PARAMS: u64 = 0x22;
    pub const SIM_POOL: u64 = 0x23;
    pub const ORACLE: u64 = 0x31;
    pub const ENSEMBLE_MEMBER: u64 = 0x41;
    pub const BOOT_RESAMPLE: u64 = 0x51;
    pub const BOOT_REFIT: u64 = 0x52;
    pub const NUISANCE: u64 = 0x61;
    pub const BENCH_REP: u64 = 0x71;
    pub const BENCH_TRUTH: u64 = 0x72;
    pub const SENS_POINT: u64 = 0x73;
}

/// SplitMix64 finalizer; decorrelates nearby integers.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from `seed` and a tag path.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    let mut h = mix(seed);
    for &t in tags {
        h = mix(h ^ mix(t));
    }
    h
}

/// Derives an independent RNG stream from `seed` and a tag path.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tags))
}
