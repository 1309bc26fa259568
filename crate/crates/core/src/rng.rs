//! Seeded uniform streams for inverse-transform sampling.
//!
//! Every stream is a ChaCha8 keystream addressed by a 64-bit seed, so a
//! replication's draws depend only on its own seed and never on how many
//! other replications ran before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct UniformStream {
    inner: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seed of replication `r` under `base`.
pub fn replication_seed(base: u64, r: u64) -> u64 {
    base ^ r
}
