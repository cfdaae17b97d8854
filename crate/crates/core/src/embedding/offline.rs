//! Deterministic hashing embedder requiring no network or model files.
//!
//! Features are word unigrams plus character trigrams of the lowercased,
//! whitespace-collapsed text. Each feature is hashed into one of `dim`
//! signed buckets; the signed counts are L2-normalized. Texts sharing
//! vocabulary land in overlapping buckets and so score a higher cosine than
//! unrelated texts, which is all downstream ranking needs.

use super::{EmbedError, Embedder};
use crate::text::{normalize_ws_lower, tokenize};

/// Hash-bucket embedder; the same text always maps to the same vector.
#[derive(Debug, Clone)]
pub struct OfflineEmbedder {
    dim: usize,
}

impl OfflineEmbedder {
    /// Default dimension when none is configured.
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedder dimension must be positive");
        OfflineEmbedder { dim }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            self.bump(&mut v, "u:", &token);
        }
        let normalized = normalize_ws_lower(text);
        let chars: Vec<char> = normalized.chars().collect();
        for window in chars.windows(3) {
            let tri: String = window.iter().collect();
            self.bump(&mut v, "t:", &tri);
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }

    fn bump(&self, v: &mut [f64], kind: &str, feature: &str) {
        let mut h = fnv1a64(kind.as_bytes());
        h = fnv1a64_continue(h, feature.as_bytes());
        let h = splitmix64(h);
        let bucket = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[bucket] += sign;
    }
}

impl Embedder for OfflineEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_continue(FNV_OFFSET, bytes)
}

fn fnv1a64_continue(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Final avalanche so nearby hash inputs spread across buckets and the top
/// sign bit is unbiased.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
