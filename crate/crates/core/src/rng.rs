//! Splittable, counter-based random streams.
//!
//! A [`Stream`] is a 64-bit key in a tree of keys. `split(label)` derives a
//! child key deterministically, so every stochastic task (one mini-batch
//! draw, one shifted circuit, one noise vector) gets its own stream no matter
//! in which order or on which thread it runs. Leaves are turned into a
//! ChaCha8 generator, which is itself a counter-mode construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels for the top-level purposes a training run splits its seed into.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const BATCH: u64 = 2;
    pub const SHOTS: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const DATA: u64 = 5;
    pub const PIXEL: u64 = 6;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed.wrapping_add(GOLDEN)),
        }
    }

    /// Child stream for `label`. Distinct labels give unrelated streams.
    pub fn split(&self, label: u64) -> Self {
        let tagged = mix64(label.wrapping_mul(GOLDEN).wrapping_add(0x632B_E59B_D9B4_E019));
        Self {
            key: mix64(self.key ^ tagged).wrapping_add(GOLDEN),
        }
    }

    pub fn split2(&self, a: u64, b: u64) -> Self {
        self.split(a).split(b)
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut state = self.key;
        for chunk in seed.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
