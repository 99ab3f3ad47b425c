//! Counter-based random streams.
//!
//! Every random quantity is drawn from a stream addressed by
//! `(seed, domain, index)`, so generation order and worker count never
//! affect the values produced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a stream.
pub mod domain {
    pub const GRIP: u64 = 1;
    pub const CLASSIFIER: u64 = 2;
    pub const NORMAL_HEAD: u64 = 3;
    pub const ENSEMBLE: u64 = 4;
    pub const MC_DROPOUT: u64 = 5;
    pub const SCENE: u64 = 6;
    pub const LAYOUT: u64 = 7;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(domain)));
    rng.set_stream(index);
    rng
}

/// Seed for a derived entity (e.g. one scene of a benchmark).
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(domain)) ^ index)
}
