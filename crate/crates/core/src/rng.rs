//! Portable seeded randomness.
//!
//! Every shuffle and random draw in the pipeline goes through
//! [`PortableRng`] so that splits, epoch orders and feedback reveals are
//! reproducible byte-for-byte on any platform or in another language.
//!
//! The generator is PCG-XSL-RR-128/64 (`Pcg64` from `rand_pcg`):
//! 128-bit LCG with multiplier `0x2360ED051FC65DA44385DF649FCCF645`,
//! output = `rotr64(hi ^ lo, state >> 122)`. A `u64` seed `s` maps to
//!
//! ```text
//! state  = (s << 64) | !s
//! stream = 0x0a02bdbf7bb3c0a7ac28fa16a64abf96
//! ```
//!
//! Bounded draws use the multiply-shift reduction
//! `index = (next_u64() as u128 * n as u128) >> 64` (no rejection step).
//! Shuffles are Fisher-Yates from the last position down:
//! for `i` in `n-1..=1`, swap `i` with `below(i + 1)`.

use rand_core::Rng;
use rand_pcg::Pcg64;
use sha2::{Digest, Sha256};

const STREAM: u128 = 0x0a02_bdbf_7bb3_c0a7_ac28_fa16_a64a_bf96;

/// Seeded PCG64 with documented seeding and reduction rules.
#[derive(Debug, Clone)]
pub struct PortableRng {
    inner: Pcg64,
}

impl PortableRng {
    pub fn new(seed: u64) -> Self {
        let state = (u128::from(seed) << 64) | u128::from(!seed);
        Self {
            inner: Pcg64::new(state, STREAM),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Index in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Standard normal draw (Box-Muller, cosine branch only).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Derives a 64-bit seed from a list of string parts: the first eight bytes
/// (little-endian) of SHA-256 over the parts joined by NUL bytes.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
