//! Deterministic 64-bit linear congruential generator.
//!
//! Both the phantom generator and the k-fold splitter draw from this
//! generator so that every number they produce can be reproduced by any
//! other implementation from the seed alone:
//!
//! ```text
//! state' = state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! ```
//!
//! (Knuth's MMIX constants.) The state is advanced before each draw. Derived
//! draws only use the high bits of the state:
//!
//! - `next_f64`: `(state >> 11) * 2^-53`, uniform on `[0, 1)`.
//! - `below(n)`: `((state >> 32) * n) >> 32`, for `n < 2^32`.
//! - `next_gaussian`: Box-Muller cosine branch with `u1 = 1 - next_f64()`
//!   (so `u1` is in `(0, 1]`) followed by `u2 = next_f64()`; the sine branch
//!   is discarded.

use std::f64::consts::PI;

pub const LCG_MULTIPLIER: u64 = 6364136223846793005;
pub const LCG_INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(LCG_MULTIPLIER)
            .wrapping_add(LCG_INCREMENT);
        self.state
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero and below 2^32.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0 && (n as u64) < (1u64 << 32), "below({n}) out of range");
        (((self.next_u64() >> 32) * n as u64) >> 32) as usize
    }

    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Fisher-Yates shuffle, walking from the back: for `i = len-1 .. 1`,
    /// swap `i` with `below(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
