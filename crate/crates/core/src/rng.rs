//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha20 generator keyed by a
//! root seed and a path of integer tags (dataset index, prior-sample index,
//! purpose). Streams are independent of scheduling, so parallel and
//! sequential runs produce bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Purpose tags mixed into stream keys.
pub mod tag {
    pub const PRIOR: u64 = 1;
    pub const PSEUDO_DATA: u64 = 2;
    pub const DATASET: u64 = 3;
    pub const DATASET_INPUT: u64 = 4;
    pub const DATASET_OUTPUT: u64 = 5;
    pub const MCMC: u64 = 6;
    pub const BASELINE: u64 = 7;
    pub const KERNEL: u64 = 8;
    pub const CALIBRATION: u64 = 9;
}

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a tag path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}
