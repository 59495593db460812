//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(key, counter)`, so a simulation keyed by
//! `(seed, path, step)` gives the same numbers whatever the thread layout.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { key: mix64(seed ^ 0x6A09_E667_F3BC_C908) }
    }

    /// Independent substream labelled `stream`.
    pub fn split(&self, stream: u64) -> Self {
        CounterRng { key: mix64(self.key ^ mix64(stream.wrapping_add(1).wrapping_mul(GOLDEN))) }
    }

    /// 64 random bits at position `counter`.
    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        mix64(mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN))) ^ self.key)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&self, counter: u64, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.bits(counter) as u128 * n as u128) >> 64) as u64
    }
}
