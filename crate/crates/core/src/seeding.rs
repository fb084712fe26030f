//! Seed derivation: every random stream in a run is an independent
//! substream keyed by `(base_seed, replicate, purpose)`, so adding a new
//! consumer never shifts the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a seed with a tag into a new, well-mixed seed.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ tag.rotate_left(17))
}

/// Hashes a purpose string (FNV-1a) into a tag usable with [`mix`].
pub fn tag(purpose: &str) -> u64 {
    purpose
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of the substream for `(base_seed, replicate, purpose)`.
pub fn substream(base_seed: u64, replicate: u64, purpose: &str) -> u64 {
    mix(mix(base_seed, replicate), tag(purpose))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
