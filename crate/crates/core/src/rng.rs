//! Reproducible random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream. The key is derived
//! from `(seed, lane)` and the 64-bit ChaCha stream id is the replica index,
//! so any replica can be regenerated in isolation and parallel runs merge
//! deterministically.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub use rand_core::RngCore as Rng;

/// Identifies one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub lane: u64,
    pub replica: u64,
}

impl StreamId {
    pub fn new(seed: u64, lane: u64, replica: u64) -> Self {
        StreamId { seed, lane, replica }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        stream(self.seed, self.lane, self.replica)
    }
}

/// Lanes keep different uses of the same seed independent.
pub mod lanes {
    pub const SIMULATE: u64 = 0;
    pub const NAIVE: u64 = 1;
    pub const SUMS: u64 = 2;
    /// Big-jump stage lanes are `BIG_JUMP_BASE + 2k` (jump probability) and
    /// `BIG_JUMP_BASE + 2k + 1` (forced-jump continuation).
    pub const BIG_JUMP_BASE: u64 = 1 << 16;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator for `(seed, lane, replica)`.
pub fn stream(seed: u64, lane: u64, replica: u64) -> ChaCha8Rng {
    let mut state = seed ^ lane.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// Uniform on `(0, 1]` with 53 random bits.
#[inline]
pub fn uniform_open_closed<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
