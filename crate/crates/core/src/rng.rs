//! Reproducible view sampling.
//!
//! The generator is ChaCha20 (RFC 8439 block function as implemented by
//! `rand_chacha`) keyed by the run seed: key bytes are the seed as 8
//! little-endian bytes followed by 24 zero bytes. Each stage draws from its
//! own stream (`stream = stage index`) starting at word position 0, so
//! stages are independent and any stage can be replayed alone.
//!
//! Uniform integers below `n` use rejection: draw `x = next_u64()` until
//! `x < n · ⌊2⁶⁴⁻¹ / n⌋`, return `x mod n`. Subsets are a partial
//! Fisher–Yates shuffle of the candidate ids sorted in byte order: for
//! `i = 0..k`, swap position `i` with `i + below(len − i)`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

pub struct StageRng {
    inner: ChaCha20Rng,
}

impl StageRng {
    pub fn new(seed: u64, stage: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha20Rng::from_seed(key);
        inner.set_stream(stage);
        inner.set_word_pos(0);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = (u64::MAX / n) * n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Draws `k` items without replacement, in draw order.
    pub fn sample<T: Clone>(&mut self, items: &[T], k: usize) -> Vec<T> {
        let mut pool = items.to_vec();
        let k = k.min(pool.len());
        for i in 0..k {
            let j = i + self.below((pool.len() - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
