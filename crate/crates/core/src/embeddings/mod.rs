//! Text embeddings from pluggable providers behind a content-addressed cache.
//!
//! Every text is first prepared the same way regardless of provider:
//! [`normalize`](crate::mathtext::normalize), then, for providers flagged
//! `needs_math_merge`, re-joined from its math-merged tokens. The cache key
//! is SHA-256 over `provider_id || 0x00 || prepared text`, so the same proof
//! embedded by two providers is cached twice.
//!
//! Vectors are cached as `f32` (the on-disk precision) and widened to `f64`
//! on the way out, so a cache hit and the original miss return identical
//! values.

mod cache;
pub(crate) mod hashing;
mod remote;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheError, CacheFile, EmbeddingCache, CACHE_MAGIC, CACHE_VERSION};
pub use hashing::{hash_embed, HASH_EMBED_PROVIDER};
pub use remote::RemoteProvider;

use crate::mathtext::{merge_math_tokens, normalize};

/// SHA-256 digest identifying a (provider, prepared text) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(pub [u8; 32]);

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

pub fn content_hash(provider_id: &str, prepared: &str) -> ContentHash {
    let mut hasher = Sha256::new();
    hasher.update(provider_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(prepared.as_bytes());
    ContentHash(hasher.finalize().into())
}

impl Serialize for ContentHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = (0..s.len())
            .step_by(2)
            .map(|i| s.get(i..i + 2).and_then(|b| u8::from_str_radix(b, 16).ok()))
            .collect::<Option<Vec<u8>>>()
            .ok_or_else(|| serde::de::Error::custom("content hash is not hex"))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("content hash must be 32 bytes"))?;
        Ok(Self(arr))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: String,
    pub content_hash: ContentHash,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn from_cached(provider_id: &str, hash: ContentHash, values: &[f32]) -> Self {
        Self {
            values: values.iter().map(|&v| f64::from(v)).collect(),
            provider_id: provider_id.to_string(),
            content_hash: hash,
        }
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("provider returned {got} values, configured dim is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("remote embedding failed after {attempts} attempt(s): {message}")]
    Remote { attempts: u32, message: String },
    #[error("text is not present in the imported embedding file")]
    NotImported,
    #[error("provider configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("{} of {} embeddings failed (first: {})", .failures.len(), .failures.len() + .succeeded, .failures.first().map(|f| f.1.as_str()).unwrap_or(""))]
    Batch {
        succeeded: usize,
        /// (input index, error message)
        failures: Vec<(usize, String)>,
    },
}

impl EmbedError {
    /// True for failures of the embedding backend itself (as opposed to bad
    /// input or configuration).
    pub fn is_outage(&self) -> bool {
        matches!(self, EmbedError::Remote { .. } | EmbedError::Batch { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProviderKind {
    RemoteEndpoint {
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the bearer token.
        #[serde(default)]
        credential_env: Option<String>,
        #[serde(default = "default_retry_base_ms")]
        retry_base_ms: u64,
    },
    DeterministicTest {
        #[serde(default)]
        seed: u64,
    },
    FileImport {
        path: PathBuf,
    },
}

fn default_retry_base_ms() -> u64 {
    500
}
fn default_max_batch() -> usize {
    100
}
fn default_max_retries() -> u32 {
    5
}
fn default_max_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_id: String,
    #[serde(flatten)]
    pub kind: ProviderKind,
    pub dim: usize,
    #[serde(default)]
    pub needs_math_merge: bool,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl ProviderConfig {
    pub fn deterministic(provider_id: &str, dim: usize, seed: u64) -> Self {
        Self {
            provider_id: provider_id.to_string(),
            kind: ProviderKind::DeterministicTest { seed },
            dim,
            needs_math_merge: true,
            max_batch: default_max_batch(),
            max_retries: default_max_retries(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.provider_id.is_empty() {
            return Err(EmbedError::Config("provider_id is empty".into()));
        }
        if self.dim == 0 {
            return Err(EmbedError::Config(format!("{}: dim must be > 0", self.provider_id)));
        }
        if self.max_batch == 0 || self.max_in_flight == 0 {
            return Err(EmbedError::Config(format!(
                "{}: max_batch and max_in_flight must be > 0",
                self.provider_id
            )));
        }
        if let ProviderKind::RemoteEndpoint { endpoint, .. } = &self.kind {
            if endpoint.is_empty() {
                return Err(EmbedError::Config(format!(
                    "{}: remote provider needs an endpoint URL",
                    self.provider_id
                )));
            }
        }
        Ok(())
    }

    /// Instantiates the provider described by this config.
    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>, EmbedError> {
        self.validate()?;
        Ok(match &self.kind {
            ProviderKind::DeterministicTest { seed } => Arc::new(HashProvider {
                config: self.clone(),
                seed: *seed,
            }),
            ProviderKind::RemoteEndpoint {
                endpoint,
                model,
                credential_env,
                retry_base_ms,
            } => Arc::new(RemoteProvider::new(
                self.clone(),
                endpoint.clone(),
                model.clone(),
                credential_env.clone(),
                Duration::from_millis(*retry_base_ms),
            )),
            ProviderKind::FileImport { path } => Arc::new(ImportedProvider::load(self.clone(), path)?),
        })
    }
}

/// Computes raw vectors for already-prepared texts.
pub trait EmbeddingProvider: Send + Sync {
    fn config(&self) -> &ProviderConfig;

    /// One call per chunk; the result must have one vector per input.
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;

    fn id(&self) -> &str {
        &self.config().provider_id
    }

    fn dim(&self) -> usize {
        self.config().dim
    }
}

/// The `deterministic-test` provider: feature hashing, no model needed.
pub struct HashProvider {
    config: ProviderConfig,
    seed: u64,
}

impl EmbeddingProvider for HashProvider {
    fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts
            .iter()
            .map(|t| {
                hashing::hash_features(t, self.config.dim, self.seed)
                    .into_iter()
                    .map(|v| v as f32)
                    .collect()
            })
            .collect())
    }
}

/// The `file-import` provider: serves vectors computed elsewhere and shipped
/// as a cache file. Texts missing from the file are an error.
pub struct ImportedProvider {
    config: ProviderConfig,
    entries: HashMap<ContentHash, Vec<f32>>,
}

impl ImportedProvider {
    pub fn load(config: ProviderConfig, path: &Path) -> Result<Self, EmbedError> {
        let bytes = std::fs::read(path).map_err(|source| CacheError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file = CacheFile::parse(&bytes)?;
        if file.count > 0 && file.dim != config.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: config.dim,
                got: file.dim,
            });
        }
        if file.provider_id != config.provider_id {
            return Err(EmbedError::Config(format!(
                "{} holds vectors for provider {}, not {}",
                path.display(),
                file.provider_id,
                config.provider_id
            )));
        }
        Ok(Self {
            config,
            entries: file.entries.into_iter().collect(),
        })
    }
}

impl EmbeddingProvider for ImportedProvider {
    fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        texts
            .iter()
            .map(|t| {
                self.entries
                    .get(&content_hash(&self.config.provider_id, t))
                    .cloned()
                    .ok_or(EmbedError::NotImported)
            })
            .collect()
    }
}

/// A provider plus the shared cache in front of it.
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    cache: Arc<EmbeddingCache>,
    calls: AtomicUsize,
}

impl Embedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>, cache: Arc<EmbeddingCache>) -> Self {
        Self {
            provider,
            cache,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_config(config: &ProviderConfig) -> Result<Self, EmbedError> {
        Ok(Self::new(config.build()?, Arc::new(EmbeddingCache::new())))
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn dim(&self) -> usize {
        self.provider.dim()
    }

    pub fn cache(&self) -> &Arc<EmbeddingCache> {
        &self.cache
    }

    /// Number of `embed_texts` calls made on the provider so far.
    pub fn provider_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Normalizes, and for math-merge providers re-joins merged tokens.
    pub fn prepare(&self, text: &str) -> String {
        prepare_text(text, self.provider.config().needs_math_merge)
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let id = self.provider.id();
        let prepared = self.prepare(text);
        if prepared.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let hash = content_hash(id, &prepared);
        if self.cache.get(id, &hash).is_none() {
            self.fetch_chunk(&[0], std::slice::from_ref(&prepared), &[hash])?;
        }
        let values = self.cache.get(id, &hash).expect("inserted by fetch");
        Ok(EmbeddingVector::from_cached(id, hash, &values))
    }

    /// Order-preserving bulk embedding. Cache misses are deduplicated,
    /// chunked to `max_batch` and sent with at most `max_in_flight`
    /// concurrent provider calls. Successful chunks are cached even when
    /// others fail; failures are reported together.
    pub fn embed_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let id = self.provider.id().to_string();
        let prepared: Vec<String> = texts.iter().map(|t| self.prepare(t.as_ref())).collect();
        let hashes: Vec<ContentHash> = prepared.iter().map(|p| content_hash(&id, p)).collect();

        let mut failures: Vec<(usize, String)> = Vec::new();
        let mut missing: Vec<usize> = Vec::new();
        let mut seen = HashMap::new();
        for (i, (p, h)) in prepared.iter().zip(&hashes).enumerate() {
            if p.is_empty() {
                failures.push((i, EmbedError::EmptyText.to_string()));
            } else if self.cache.get(&id, h).is_none() && seen.insert(*h, i).is_none() {
                missing.push(i);
            }
        }

        let cfg = self.provider.config();
        let chunks: Vec<&[usize]> = missing.chunks(cfg.max_batch).collect();
        let chunk_errors: Mutex<Vec<(usize, String)>> = Mutex::new(Vec::new());
        let next = AtomicUsize::new(0);
        let workers = cfg.max_in_flight.min(chunks.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let c = next.fetch_add(1, Ordering::SeqCst);
                    let Some(chunk) = chunks.get(c) else { break };
                    if let Err(e) = self.fetch_chunk(chunk, &prepared, &hashes) {
                        let msg = e.to_string();
                        let mut errs = chunk_errors.lock().expect("error list poisoned");
                        errs.extend(chunk.iter().map(|&i| (i, msg.clone())));
                    }
                });
            }
        });

        let failed_hashes: HashMap<ContentHash, String> = chunk_errors
            .into_inner()
            .expect("error list poisoned")
            .into_iter()
            .map(|(i, m)| (hashes[i], m))
            .collect();

        let mut out = Vec::with_capacity(texts.len());
        for (i, h) in hashes.iter().enumerate() {
            if prepared[i].is_empty() {
                continue;
            }
            match self.cache.get(&id, h) {
                Some(values) => out.push(EmbeddingVector::from_cached(&id, *h, &values)),
                None => failures.push((
                    i,
                    failed_hashes
                        .get(h)
                        .cloned()
                        .unwrap_or_else(|| "embedding missing after fetch".into()),
                )),
            }
        }

        if failures.is_empty() {
            return Ok(out);
        }
        failures.sort_by_key(|f| f.0);
        Err(EmbedError::Batch {
            succeeded: out.len(),
            failures,
        })
    }

    fn fetch_chunk(&self, chunk: &[usize], prepared: &[String], hashes: &[ContentHash]) -> Result<(), EmbedError> {
        let inputs: Vec<String> = chunk.iter().map(|&i| prepared[i].clone()).collect();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let vectors = self.provider.embed_texts(&inputs)?;
        if vectors.len() != inputs.len() {
            return Err(EmbedError::Remote {
                attempts: 1,
                message: format!(
                    "provider returned {} vectors for {} inputs",
                    vectors.len(),
                    inputs.len()
                ),
            });
        }
        let dim = self.provider.dim();
        for (&i, v) in chunk.iter().zip(vectors) {
            if v.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            self.cache.insert(self.provider.id(), hashes[i], v)?;
        }
        Ok(())
    }
}

/// Normalization plus optional math-token merging; the exact text that is
/// hashed and sent to a provider.
pub fn prepare_text(text: &str, needs_math_merge: bool) -> String {
    let normalized = normalize(text);
    if needs_math_merge {
        merge_math_tokens(&normalized).joined()
    } else {
        normalized
    }
}
