//! Seeded random number generation.
//!
//! Every stochastic component draws from a ChaCha8 stream keyed by a 64-bit
//! seed and a stream label, so results do not depend on platform or on the
//! order in which independent runs are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier written into every run manifest.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9, seed_from_u64 + stream id)";

pub type Rng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream labels used across the crate.
pub mod streams {
    pub const NOISE: u64 = 1;
    pub const TARGETS: u64 = 2;
    pub const DATA: u64 = 3;
    pub const INIT: u64 = 4;
    pub const BATCHES: u64 = 5;
    pub const GRADIENTS: u64 = 6;
}
