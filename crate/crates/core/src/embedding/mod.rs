//! Text embeddings, cosine similarity and mention-to-node linking.

#[cfg(feature = "http")]
mod http;
mod linker;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[cfg(feature = "http")]
pub use http::HttpEmbedder;
pub use linker::{EntityLinker, LinkResult, DEFAULT_K, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    #[error("text is empty")]
    EmptyText,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("embedder failed: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct EmbeddingVector<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped into [-1, 1].
pub fn cosine<T: Scalar>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T, EmbedError> {
    if a.dims() != b.dims() {
        return Err(EmbedError::DimMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == T::zero() || nb == T::zero() {
        return Err(EmbedError::ZeroVector);
    }
    let dot = a
        .values
        .iter()
        .zip(&b.values)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    let c = dot / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}

pub trait Embedder<T: Scalar>: Send + Sync {
    fn dims(&self) -> usize;

    /// Identifies the embedder for cache keys; equal fingerprints must
    /// produce equal vectors.
    fn fingerprint(&self) -> String;

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError>;
}

pub const MOCK_DIMS: usize = 64;
pub const MOCK_SEED: u64 = 0x5eed_cafe_f00d_d00d;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Lower-cased alphanumeric runs of `text`.
pub fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// FNV-1a over the seed's little-endian bytes followed by the token bytes.
pub fn token_hash(seed: u64, token: &str) -> u64 {
    seed.to_le_bytes()
        .iter()
        .chain(token.as_bytes())
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Deterministic feature-hashing embedder. Each token adds `+1` or `-1`
/// (top hash bit) to bucket `hash % dims`; the sum is L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dims: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dims: MOCK_DIMS,
            seed: MOCK_SEED,
        }
    }
}

impl<T: Scalar> Embedder<T> for HashEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn fingerprint(&self) -> String {
        format!("hash-{}-{:016x}", self.dims, self.seed)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        let toks = tokens(text);
        if toks.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut values = vec![T::zero(); self.dims];
        for t in &toks {
            let h = token_hash(self.seed, t);
            let bucket = (h % self.dims as u64) as usize;
            if h >> 63 == 1 {
                values[bucket] = values[bucket] - T::one();
            } else {
                values[bucket] = values[bucket] + T::one();
            }
        }
        let v = EmbeddingVector { values };
        let n = v.norm();
        // Opposite-signed collisions can cancel to zero; leave that vector
        // as is so cosine reports it.
        Ok(if n > T::zero() { v.scaled(T::one() / n) } else { v })
    }
}
