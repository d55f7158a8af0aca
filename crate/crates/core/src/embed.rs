//! Tokenization and embedding providers.
//!
//! Selection needs per-token vectors and sequence vectors for retrieval keys.
//! The default provider is an offline hash embedder: each distinct token maps
//! to a pseudo-random unit vector seeded by a stable hash of the token, so
//! results are reproducible with no model weights or network. A remote
//! endpoint client is available behind the `remote` feature, and
//! [`BasisEmbedder`] assigns exactly orthonormal vectors for tests and demos
//! that need idealized geometry.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Offline embedder dimension. High enough that distinct hash vectors are
/// near-orthogonal, small enough to stay cheap.
pub const HASH_EMBEDDER_DIM: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("text has no tokens: {0:?}")]
    NoTokens(String),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("basis embedder ran out of dimensions ({dim}) for token {token:?}")]
    BasisExhausted { token: String, dim: usize },
    #[error("embedding provider '{provider}' failed after {attempts} attempt(s): {message}")]
    Provider {
        provider: String,
        attempts: u32,
        message: String,
    },
}

/// One token paired with its unit-norm vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbedding {
    pub token: String,
    pub vector: Vec<f64>,
}

/// A text with its token vectors and a unit-norm sequence vector
/// (the L2-normalized mean of the token vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedText {
    pub text: String,
    pub tokens: Vec<TokenEmbedding>,
    pub sequence_vector: Vec<f64>,
}

/// Lowercases and splits on non-alphanumeric runs. Deterministic; duplicates
/// are preserved; returns an empty list only for text with no alphanumerics.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Cosine similarity with fixed left-to-right accumulation, so that
/// `cosine(a, b) == cosine(b, a)` exactly.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimMismatch(a.len(), b.len()));
    }
    let mut dot = 0.0;
    let mut norm_a = 0.0;
    let mut norm_b = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok(dot / (norm_a.sqrt() * norm_b.sqrt()))
}

/// Supplies token-level and sequence-level embeddings for retrieval keys.
///
/// Implementations must be deterministic functions of (provider identity,
/// text) and safe for concurrent calls.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed_text(&self, text: &str) -> Result<Arc<EmbeddedText>, EmbedError>;
}

fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>, EmbedError> {
    let norm = v.iter().fold(0.0, |acc, x| acc + x * x).sqrt();
    if norm == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    for x in &mut v {
        *x /= norm;
    }
    Ok(v)
}

fn sequence_from_tokens(tokens: &[TokenEmbedding], dim: usize) -> Result<Vec<f64>, EmbedError> {
    let mut mean = vec![0.0; dim];
    for t in tokens {
        for (m, x) in mean.iter_mut().zip(&t.vector) {
            *m += x;
        }
    }
    let n = tokens.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    normalize(mean)
}

/// Stable 64-bit seed for a token: the first eight bytes of its SHA-256.
fn token_seed(token: &str) -> u64 {
    let digest = Sha256::digest(token.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Deterministic offline embedder: each distinct token maps to a
/// pseudo-random unit vector drawn from a ChaCha stream seeded by a stable
/// hash of the token. Context-free by construction.
pub struct HashEmbedder {
    dim: usize,
    token_cache: RwLock<HashMap<String, Arc<Vec<f64>>>>,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(HASH_EMBEDDER_DIM)
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder {
            dim,
            token_cache: RwLock::new(HashMap::new()),
        }
    }

    fn token_vector(&self, token: &str) -> Arc<Vec<f64>> {
        if let Some(v) = self.token_cache.read().unwrap().get(token) {
            return Arc::clone(v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(token_seed(token));
        let raw: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let v = Arc::new(normalize(raw).expect("gaussian sample is nonzero"));
        let mut cache = self.token_cache.write().unwrap();
        Arc::clone(cache.entry(token.to_string()).or_insert(v))
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn provider_id(&self) -> &str {
        "hash"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Arc<EmbeddedText>, EmbedError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbedError::NoTokens(text.to_string()));
        }
        let token_embeddings: Vec<TokenEmbedding> = tokens
            .into_iter()
            .map(|token| {
                let vector = self.token_vector(&token).as_ref().clone();
                TokenEmbedding { token, vector }
            })
            .collect();
        let sequence_vector = sequence_from_tokens(&token_embeddings, self.dim)?;
        Ok(Arc::new(EmbeddedText {
            text: text.to_string(),
            tokens: token_embeddings,
            sequence_vector,
        }))
    }
}

/// Test-oriented embedder that assigns each distinct token the next standard
/// basis vector, giving exactly orthonormal token geometry.
pub struct BasisEmbedder {
    dim: usize,
    assignment: RwLock<HashMap<String, usize>>,
}

impl Default for BasisEmbedder {
    fn default() -> Self {
        Self::new(64)
    }
}

impl BasisEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        BasisEmbedder {
            dim,
            assignment: RwLock::new(HashMap::new()),
        }
    }

    fn axis(&self, token: &str) -> Result<usize, EmbedError> {
        if let Some(&i) = self.assignment.read().unwrap().get(token) {
            return Ok(i);
        }
        let mut map = self.assignment.write().unwrap();
        let next = map.len();
        if let Some(&i) = map.get(token) {
            return Ok(i);
        }
        if next >= self.dim {
            return Err(EmbedError::BasisExhausted {
                token: token.to_string(),
                dim: self.dim,
            });
        }
        map.insert(token.to_string(), next);
        Ok(next)
    }
}

impl EmbeddingProvider for BasisEmbedder {
    fn provider_id(&self) -> &str {
        "basis"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Arc<EmbeddedText>, EmbedError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbedError::NoTokens(text.to_string()));
        }
        let token_embeddings: Vec<TokenEmbedding> = tokens
            .into_iter()
            .map(|token| {
                let mut vector = vec![0.0; self.dim];
                vector[self.axis(&token)?] = 1.0;
                Ok(TokenEmbedding { token, vector })
            })
            .collect::<Result<_, EmbedError>>()?;
        let sequence_vector = sequence_from_tokens(&token_embeddings, self.dim)?;
        Ok(Arc::new(EmbeddedText {
            text: text.to_string(),
            tokens: token_embeddings,
            sequence_vector,
        }))
    }
}

/// Caches whole-text embeddings keyed by (provider id, text). Reads share a
/// lock; inserts are serialized.
pub struct CachingProvider<P> {
    inner: P,
    cache: RwLock<HashMap<String, Arc<EmbeddedText>>>,
}

impl<P: EmbeddingProvider> CachingProvider<P> {
    pub fn new(inner: P) -> Self {
        CachingProvider {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachingProvider<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_text(&self, text: &str) -> Result<Arc<EmbeddedText>, EmbedError> {
        if let Some(hit) = self.cache.read().unwrap().get(text) {
            return Ok(Arc::clone(hit));
        }
        let embedded = self.inner.embed_text(text)?;
        let mut cache = self.cache.write().unwrap();
        Ok(Arc::clone(
            cache.entry(text.to_string()).or_insert(embedded),
        ))
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn provider_id(&self) -> &str {
        (*self).provider_id()
    }

    fn dim(&self) -> usize {
        (*self).dim()
    }

    fn embed_text(&self, text: &str) -> Result<Arc<EmbeddedText>, EmbedError> {
        (*self).embed_text(text)
    }
}

#[cfg(feature = "remote")]
pub use remote::RemoteEmbedder;

#[cfg(feature = "remote")]
mod remote {
    //! Client for an OpenAI-compatible `/v1/embeddings` endpoint.
    //!
    //! The endpoint returns sequence vectors only; token vectors are
    //! approximated by embedding each token string separately. Request shape:
    //! `POST {base_url}/v1/embeddings` with `{"model": ..., "input": [..]}`,
    //! bearer auth from the environment variable named in the config.

    use super::*;
    use serde::Deserialize;

    pub struct RemoteEmbedder {
        base_url: String,
        model: String,
        auth_env: String,
        dim: usize,
        max_retries: u32,
        client: reqwest::blocking::Client,
    }

    #[derive(Deserialize)]
    struct EmbeddingsResponse {
        data: Vec<EmbeddingRow>,
    }

    #[derive(Deserialize)]
    struct EmbeddingRow {
        embedding: Vec<f64>,
    }

    impl RemoteEmbedder {
        pub fn new(base_url: &str, model: &str, auth_env: &str, dim: usize) -> Self {
            RemoteEmbedder {
                base_url: base_url.trim_end_matches('/').to_string(),
                model: model.to_string(),
                auth_env: auth_env.to_string(),
                dim,
                max_retries: 3,
                client: reqwest::blocking::Client::new(),
            }
        }

        fn post_embeddings(&self, input: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
            let url = format!("{}/v1/embeddings", self.base_url);
            let token = std::env::var(&self.auth_env).unwrap_or_default();
            let body = serde_json::json!({ "model": self.model, "input": input });
            let mut attempts = 0;
            loop {
                attempts += 1;
                let sent = self
                    .client
                    .post(&url)
                    .bearer_auth(&token)
                    .json(&body)
                    .send();
                match sent {
                    Ok(resp) if resp.status().is_success() => {
                        let parsed: EmbeddingsResponse =
                            resp.json().map_err(|e| EmbedError::Provider {
                                provider: "remote".into(),
                                attempts,
                                message: e.to_string(),
                            })?;
                        return parsed
                            .data
                            .into_iter()
                            .map(|row| normalize(row.embedding))
                            .collect();
                    }
                    Ok(resp) => {
                        let status = resp.status();
                        let retryable =
                            status.as_u16() == 429 || status.is_server_error();
                        if !retryable || attempts > self.max_retries {
                            return Err(EmbedError::Provider {
                                provider: "remote".into(),
                                attempts,
                                message: format!("http status {status}"),
                            });
                        }
                    }
                    Err(e) => {
                        if attempts > self.max_retries {
                            return Err(EmbedError::Provider {
                                provider: "remote".into(),
                                attempts,
                                message: e.to_string(),
                            });
                        }
                    }
                }
                std::thread::sleep(std::time::Duration::from_millis(
                    200u64 << attempts.min(6),
                ));
            }
        }
    }

    impl EmbeddingProvider for RemoteEmbedder {
        fn provider_id(&self) -> &str {
            "remote"
        }

        fn dim(&self) -> usize {
            self.dim
        }

        fn embed_text(&self, text: &str) -> Result<Arc<EmbeddedText>, EmbedError> {
            let tokens = tokenize(text);
            if tokens.is_empty() {
                return Err(EmbedError::NoTokens(text.to_string()));
            }
            let mut input: Vec<&str> = vec![text];
            input.extend(tokens.iter().map(String::as_str));
            let mut vectors = self.post_embeddings(&input)?;
            if vectors.len() != tokens.len() + 1 {
                return Err(EmbedError::Provider {
                    provider: "remote".into(),
                    attempts: 1,
                    message: format!(
                        "expected {} embeddings, got {}",
                        tokens.len() + 1,
                        vectors.len()
                    ),
                });
            }
            let sequence_vector = vectors.remove(0);
            let token_embeddings = tokens
                .into_iter()
                .zip(vectors)
                .map(|(token, vector)| TokenEmbedding { token, vector })
                .collect();
            Ok(Arc::new(EmbeddedText {
                text: text.to_string(),
                tokens: token_embeddings,
                sequence_vector,
            }))
        }
    }
}
