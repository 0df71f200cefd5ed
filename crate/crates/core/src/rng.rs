//! Seeded random numbers with a pinned algorithm.
//!
//! Every stochastic choice in the crate (weight init, shuffles, random phase)
//! flows through [`SeededRng`], a thin wrapper over ChaCha8 with an explicit
//! integer-to-float mapping, so that a given seed reproduces bit-identical
//! results across platforms and releases.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::scalar::{real, Real};

/// Deterministic random source. Floats are derived from the top 53 bits of
/// each 64-bit output: `(x >> 11) * 2^-53`, uniform in `[0, 1)`.
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derives an independent stream for a sub-task (per-epoch shuffles,
    /// per-layer init) without perturbing the parent stream.
    pub fn derive(seed: u64, stream: u64) -> Self {
        // SplitMix64 finalizer decorrelates nearby (seed, stream) pairs.
        let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Self::new(z ^ (z >> 31))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform<F: Real>(&mut self, lo: F, hi: F) -> F {
        lo + (hi - lo) * real::<F>(self.next_f64())
    }

    /// Uniform index in `[0, n)`. The modulo bias is below `n / 2^64`,
    /// irrelevant at the collection sizes used here.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn floats_in_unit_interval() {
        let mut rng = SeededRng::new(1);
        for _ in 0..1000 {
            let v = rng.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = SeededRng::derive(7, 0);
        let mut b = SeededRng::derive(7, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = SeededRng::new(3);
        let mut xs: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }
}
