//! Feature-hashing embedding used by the `deterministic-test` provider.
//!
//! For every token of `merge_math_tokens(normalize(text))`:
//!
//! ```text
//! h      = SHA-256(seed as 8 little-endian bytes || token UTF-8 bytes)
//! bucket = u64::from_le_bytes(h[0..8]) mod dim
//! sign   = +1 if h[8] is even, else -1
//! v[bucket] += sign
//! ```
//!
//! The vector is then divided by its L2 norm. A text with no tokens, or
//! whose signed counts cancel exactly, maps to the zero vector.

use sha2::{Digest, Sha256};

use super::{content_hash, EmbeddingVector};
use crate::mathtext::{merge_math_tokens, normalize};

pub const HASH_EMBED_PROVIDER: &str = "hash-embed";

pub fn hash_embed(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    let normalized = normalize(text);
    let values = hash_features(&normalized, dim, seed);
    EmbeddingVector {
        content_hash: content_hash(HASH_EMBED_PROVIDER, &normalized),
        provider_id: HASH_EMBED_PROVIDER.to_string(),
        values,
    }
}

/// The raw kernel over already-normalized text.
pub(crate) fn hash_features(normalized: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut v = vec![0.0f64; dim];
    let seed_bytes = seed.to_le_bytes();
    for token in merge_math_tokens(normalized).tokens {
        let mut hasher = Sha256::new();
        hasher.update(seed_bytes);
        hasher.update(token.as_bytes());
        let h = hasher.finalize();
        let bucket = u64::from_le_bytes(h[..8].try_into().expect("32-byte digest")) % dim as u64;
        let sign = if h[8] % 2 == 0 { 1.0 } else { -1.0 };
        v[bucket as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_texts_identical_vectors() {
        let a = hash_embed("P(1) holds since 1 = 1(2)/2.", 64, 3);
        let b = hash_embed("P(1) holds since 1 = 1(2)/2.", 64, 3);
        assert_eq!(a, b);
        assert_ne!(a.values, hash_embed("P(1) holds since 1 = 1(2)/2.", 64, 4).values);
    }

    #[test]
    fn bag_of_tokens_property() {
        let a = hash_embed("base case holds\n\nassume P(k)", 128, 0);
        let b = hash_embed("assume P(k)\n\nbase case holds", 128, 0);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = hash_embed("   ", 16, 0);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn unit_norm(words in proptest::collection::vec("[a-z]{1,8}", 1..30), seed in any::<u64>()) {
            let text = words.join(" ");
            let v = hash_embed(&text, 1024, seed);
            let norm = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            // Exact cancellation is possible in principle; it needs two
            // distinct tokens colliding with opposite signs and nothing else.
            prop_assume!(norm > 0.0);
            prop_assert!((norm - 1.0).abs() <= 1e-9);
            prop_assert_eq!(v.values.len(), 1024);
        }
    }
}
