//! Seed-splittable random streams.
//!
//! A [`SeedStream`] maps a base seed and a sample index to an independent
//! ChaCha stream, so Monte Carlo loops give the same answer no matter how the
//! samples are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// A family of independent random streams indexed by `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for stream `index`.
    pub fn rng(&self, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// A derived family, e.g. one per optimizer iteration.
    pub fn fork(&self, index: u64) -> SeedStream {
        // splitmix64 finalizer over (seed, index)
        let mut z = self
            .seed
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeedStream::new(z ^ (z >> 31))
    }
}
