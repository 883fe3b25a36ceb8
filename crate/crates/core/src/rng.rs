//! Deterministic seed derivation.
//!
//! Every stochastic component takes its stream from [`stream`], keyed by the
//! run seed plus a path of labels (rep, step, path index, ...). Streams are
//! therefore independent of evaluation order and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of labels into a new 64-bit seed.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &label| splitmix(acc ^ splitmix(label)))
}

pub fn stream(seed: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive(seed, path))
}

/// A uniform draw in [0, 1) that depends only on `(seed, path)`.
pub fn keyed_uniform(seed: u64, path: &[u64]) -> f64 {
    (derive(seed, path) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Labels used to separate streams. Arbitrary but fixed.
pub mod label {
    pub const CONTEXT: u64 = 1;
    pub const CANDIDATES: u64 = 2;
    pub const RESPONSE_CARRIER: u64 = 3;
    pub const RESPONSE_SHIPPER: u64 = 4;
    pub const POLICY: u64 = 5;
    pub const BAGGING: u64 = 6;
    pub const TRUTH: u64 = 7;
    pub const BOOKING: u64 = 8;
    pub const LOOKAHEAD: u64 = 9;
    pub const HISTORY: u64 = 10;
    pub const DRIVERS: u64 = 11;
    pub const WARMUP: u64 = 12;
    pub const HELDOUT: u64 = 13;
}
