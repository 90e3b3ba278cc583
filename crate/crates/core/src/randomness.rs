//! Deterministic, seedable source of uniform draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A seeded stream of uniform `[0, 1)` draws.
///
/// Equal seeds give bit-identical sequences within one build. A stream is
/// single-owner: clone the seed, not the stream, to fan out work.
#[derive(Debug, Clone)]
pub struct SeededRandomness {
    seed: u64,
    position: u64,
    rng: ChaCha12Rng,
}

impl SeededRandomness {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            position: 0,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of uniform draws taken so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Next uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.position += 1;
        self.rng.random::<f64>()
    }

    /// The underlying generator, for sampling that is not a plain uniform draw
    /// (shuffles, Gaussian variates). Such draws do not advance `position`.
    pub fn rng_mut(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// Derives an independent child seed; used to give each Monte Carlo run its own stream.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
