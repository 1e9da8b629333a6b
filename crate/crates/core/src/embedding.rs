//! Embedding vectors and providers.
//!
//! The local provider is a signed feature-hashing bag of words: each token is
//! hashed with FNV-1a 64, lands in bucket `h mod D` with sign taken from bit
//! 63, counts accumulate, and the result is L2-normalized. The remote provider
//! posts text to an HTTP endpoint and normalizes whatever comes back.

use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::fnv1a64;
use crate::ingest::CleanText;
use crate::scalar::{ordered_sum, Real};

pub const DEFAULT_DIMENSION: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("embedding provider unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
}

/// A fixed-dimension vector; unit length unless it is the zero vector, which
/// is flagged as non-normalizable.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
    normalized: bool,
}

impl<T: Real> EmbeddingVector<T> {
    /// L2-normalize raw values. All-zero input yields the flagged zero vector.
    pub fn normalize(raw: Vec<T>) -> Result<Self, EmbedError> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = ordered_sum(raw.iter().map(|&v| v * v)).sqrt();
        if norm == T::zero() {
            return Ok(Self {
                values: raw,
                normalized: false,
            });
        }
        let values = raw.into_iter().map(|v| v / norm).collect();
        Ok(Self {
            values,
            normalized: true,
        })
    }

    pub fn zero(dimension: usize) -> Self {
        Self {
            values: vec![T::zero(); dimension],
            normalized: false,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> T {
        ordered_sum(self.values.iter().map(|&v| v * v)).sqrt()
    }
}

/// Dot product of two unit vectors.
pub fn cosine<T: Real>(u: &EmbeddingVector<T>, v: &EmbeddingVector<T>) -> Result<T, EmbedError> {
    if !u.normalized || !v.normalized {
        return Err(EmbedError::ZeroVector);
    }
    if u.dimension() != v.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: u.dimension(),
            actual: v.dimension(),
        });
    }
    let dot = ordered_sum(u.values.iter().zip(&v.values).map(|(&a, &b)| a * b));
    Ok(dot.max(-T::one()).min(T::one()))
}

/// Something that turns clean text into an embedding.
pub trait Embedder<T>: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &CleanText) -> Result<EmbeddingVector<T>, EmbedError>;
}

/// Deterministic feature-hashing provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalEmbedder {
    dimension: usize,
}

impl LocalEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

/// Bucket and sign of a token under the local hashing scheme.
pub fn hash_bucket(token: &str, dimension: usize) -> (usize, bool) {
    let h = fnv1a64(token.as_bytes());
    ((h % dimension as u64) as usize, h >> 63 == 1)
}

pub fn embed_local<T: Real>(text: &CleanText, dimension: usize) -> EmbeddingVector<T> {
    let mut counts = vec![T::zero(); dimension];
    for token in text.tokens() {
        let (bucket, negative) = hash_bucket(token, dimension);
        if negative {
            counts[bucket] = counts[bucket] - T::one();
        } else {
            counts[bucket] = counts[bucket] + T::one();
        }
    }
    EmbeddingVector::normalize(counts).expect("counts are finite")
}

impl<T: Real> Embedder<T> for LocalEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &CleanText) -> Result<EmbeddingVector<T>, EmbedError> {
        Ok(embed_local(text, self.dimension))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub dimension: usize,
    pub timeout: Duration,
    /// Additional attempts after the first failure.
    pub retries: u32,
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, dimension: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            dimension,
            timeout: Duration::from_secs(10),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

/// HTTP provider: `POST {endpoint}` with `{"text": ...}`, expecting
/// `{"embedding": [...]}`.
#[derive(Debug)]
pub struct RemoteEmbedder {
    config: RemoteConfig,
    client: OnceLock<reqwest::blocking::Client>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteConfig) -> Result<Self, EmbedError> {
        Ok(Self {
            config,
            client: OnceLock::new(),
        })
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, String> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(self.config.timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(self.client.get_or_init(|| c))
    }

    fn attempt(&self, text: &str) -> Result<Vec<f64>, String> {
        let resp = self
            .client()?
            .post(&self.config.endpoint)
            .json(&EmbedRequest { text })
            .send()
            .map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        resp.json::<EmbedResponse>()
            .map(|r| r.embedding)
            .map_err(|e| e.to_string())
    }
}

impl<T: Real> Embedder<T> for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, text: &CleanText) -> Result<EmbeddingVector<T>, EmbedError> {
        let joined = text.joined();
        let mut last_error = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff);
            }
            match self.attempt(&joined) {
                Ok(raw) => {
                    if raw.len() != self.config.dimension {
                        return Err(EmbedError::DimensionMismatch {
                            expected: self.config.dimension,
                            actual: raw.len(),
                        });
                    }
                    return EmbeddingVector::normalize(raw.into_iter().map(T::of).collect());
                }
                Err(e) => {
                    log::warn!("embedding request {} of {} failed: {e}", attempt + 1, self.config.retries + 1);
                    last_error = e;
                }
            }
        }
        Err(EmbedError::EmbedderUnavailable(last_error))
    }
}
