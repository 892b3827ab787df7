//! Seed derivation.
//!
//! Every random stream in the pipeline is a ChaCha8 generator whose seed is
//! derived from the run's base seed plus a small tuple of stream coordinates
//! (iteration, epoch, instance id, ...). Streams never share state, so work can
//! be split across threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a. Stable across platforms and toolchains, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// splitmix64 finalizer.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds stream coordinates into a base seed.
pub fn derive(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(base), |acc, &c| mix(acc ^ mix(c)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `coords` under `base`.
pub fn stream(base: u64, coords: &[u64]) -> Rng {
    rng(derive(base, coords))
}

/// Stream tags, so that e.g. epoch 3 of the shuffle stream and epoch 3 of the
/// complementary-label stream never collide.
pub mod tag {
    pub const SHUFFLE: u64 = 1;
    pub const COMPLEMENT: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const NOISE_SELECT: u64 = 5;
    pub const NOISE_LABEL: u64 = 6;
    pub const BAG_ASSIGN: u64 = 7;
    pub const SYNTH: u64 = 8;
}
