//! Counter-based random draws keyed by (seed, slot, purpose).
//!
//! Each purpose owns a ChaCha stream and the draw for a slot sits at a fixed
//! word position, so adding a purpose or skipping slots never shifts the
//! draws of another.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    D2dAccess = 1,
}

#[derive(Debug, Clone)]
pub struct DrawStream {
    rng: ChaCha8Rng,
}

impl DrawStream {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(purpose as u64);
        Self { rng }
    }

    /// Uniform draw in [0, 1) for `slot`.
    pub fn uniform(&mut self, slot: u64) -> f64 {
        self.rng.set_word_pos(u128::from(slot) * 2);
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
