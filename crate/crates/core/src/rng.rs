//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha20 keystream. A stream is
//! addressed by a 64-bit seed (the key) and a 64-bit stream id built from a
//! [`Purpose`] tag and an index, so each column or trial owns an independent
//! generator and results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Name of the generator, recorded in configuration files.
pub const RNG_ALGORITHM: &str = "chacha20";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    InitialCondition = 1,
    SignalNoise = 2,
    NoiseColumn = 3,
    Weights = 4,
    Perturbation = 5,
    Redraw = 6,
    Placement = 7,
    Subset = 8,
    Instance = 9,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a path of labels.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(parent), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Opens the stream `(purpose, index)` under `seed`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & 0xffff_ffff_ffff));
    rng
}
