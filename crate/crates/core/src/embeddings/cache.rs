//! Content-addressed embedding cache with a portable binary file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "PGEC"                      4 bytes magic
//! version                     u16 (= 1)
//! provider_id length          u32, followed by that many UTF-8 bytes
//! dim                         u32
//! entry count                 u64
//! entries                     count × (32-byte content hash, dim × f32)
//! ```
//!
//! Entries are written in ascending hash order so that exporting the same
//! cache twice yields identical bytes.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use super::ContentHash;

pub const CACHE_MAGIC: &[u8; 4] = b"PGEC";
pub const CACHE_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt cache file at byte offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("unsupported cache version {0}")]
    Version(u16),
    #[error("provider {provider_id} has dim {existing} in the cache, got {incoming}")]
    DimConflict {
        provider_id: String,
        existing: usize,
        incoming: usize,
    },
    #[error("refusing to cache a non-finite embedding value")]
    NonFinite,
}

#[derive(Debug, Default)]
struct ProviderStore {
    dim: usize,
    entries: HashMap<ContentHash, Arc<[f32]>>,
}

/// In-memory cache keyed by provider, then content hash. Readers share a
/// read lock; inserts and imports take the write lock.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    stores: RwLock<HashMap<String, ProviderStore>>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, provider_id: &str, hash: &ContentHash) -> Option<Arc<[f32]>> {
        let stores = self.stores.read().expect("cache lock poisoned");
        stores.get(provider_id)?.entries.get(hash).cloned()
    }

    pub fn insert(&self, provider_id: &str, hash: ContentHash, values: Vec<f32>) -> Result<Arc<[f32]>, CacheError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CacheError::NonFinite);
        }
        let mut stores = self.stores.write().expect("cache lock poisoned");
        let store = stores.entry(provider_id.to_string()).or_default();
        if store.entries.is_empty() && store.dim == 0 {
            store.dim = values.len();
        } else if store.dim != values.len() {
            return Err(CacheError::DimConflict {
                provider_id: provider_id.to_string(),
                existing: store.dim,
                incoming: values.len(),
            });
        }
        let values: Arc<[f32]> = values.into();
        store.entries.insert(hash, Arc::clone(&values));
        Ok(values)
    }

    pub fn len(&self, provider_id: &str) -> usize {
        let stores = self.stores.read().expect("cache lock poisoned");
        stores.get(provider_id).map_or(0, |s| s.entries.len())
    }

    pub fn dim(&self, provider_id: &str) -> Option<usize> {
        let stores = self.stores.read().expect("cache lock poisoned");
        stores.get(provider_id).map(|s| s.dim).filter(|&d| d > 0)
    }

    /// Serializes one provider's entries. A provider with no entries still
    /// produces a valid file with `dim` 0 and no entries.
    pub fn to_bytes(&self, provider_id: &str) -> Vec<u8> {
        let stores = self.stores.read().expect("cache lock poisoned");
        let (dim, mut entries) = match stores.get(provider_id) {
            Some(s) => (s.dim, s.entries.iter().collect::<Vec<_>>()),
            None => (0, Vec::new()),
        };
        entries.sort_by(|a, b| a.0.cmp(b.0));

        let id = provider_id.as_bytes();
        let mut out = Vec::with_capacity(22 + id.len() + entries.len() * (32 + 4 * dim));
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
        for (hash, values) in entries {
            out.extend_from_slice(&hash.0);
            for v in values.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Writes one provider's entries to `path`; returns the entry count.
    pub fn export(&self, path: impl AsRef<Path>, provider_id: &str) -> Result<usize, CacheError> {
        let path = path.as_ref();
        let bytes = self.to_bytes(provider_id);
        let io = |source| CacheError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(&bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
        Ok(self.len(provider_id))
    }

    /// Loads a cache file; returns the number of entries it held.
    pub fn import(&self, path: impl AsRef<Path>) -> Result<usize, CacheError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| CacheError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.import_bytes(&bytes)
    }

    pub fn import_bytes(&self, bytes: &[u8]) -> Result<usize, CacheError> {
        let file = CacheFile::parse(bytes)?;
        let mut stores = self.stores.write().expect("cache lock poisoned");
        let store = stores.entry(file.provider_id.clone()).or_default();
        if file.count > 0 {
            if store.dim != 0 && store.dim != file.dim {
                return Err(CacheError::DimConflict {
                    provider_id: file.provider_id,
                    existing: store.dim,
                    incoming: file.dim,
                });
            }
            store.dim = file.dim;
        }
        for (hash, values) in file.entries {
            store.entries.insert(hash, values.into());
        }
        Ok(file.count)
    }
}

/// A parsed cache file.
#[derive(Debug)]
pub struct CacheFile {
    pub provider_id: String,
    pub dim: usize,
    pub count: usize,
    pub entries: Vec<(ContentHash, Vec<f32>)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CacheError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CacheError::Corrupt {
                offset: self.pos,
                reason: format!("truncated while reading {what}"),
            }),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N], CacheError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

impl CacheFile {
    pub fn parse(bytes: &[u8]) -> Result<Self, CacheError> {
        let mut r = Reader { bytes, pos: 0 };
        if &r.array::<4>("magic")? != CACHE_MAGIC {
            return Err(CacheError::Corrupt {
                offset: 0,
                reason: "bad magic bytes".into(),
            });
        }
        let version = u16::from_le_bytes(r.array("version")?);
        if version != CACHE_VERSION {
            return Err(CacheError::Version(version));
        }
        let id_len = u32::from_le_bytes(r.array("provider id length")?) as usize;
        let id_offset = r.pos;
        let provider_id = std::str::from_utf8(r.take(id_len, "provider id")?)
            .map_err(|_| CacheError::Corrupt {
                offset: id_offset,
                reason: "provider id is not UTF-8".into(),
            })?
            .to_string();
        let dim = u32::from_le_bytes(r.array("dim")?) as usize;
        let count_offset = r.pos;
        let count = u64::from_le_bytes(r.array("entry count")?) as usize;
        if count > 0 && dim == 0 {
            return Err(CacheError::Corrupt {
                offset: count_offset,
                reason: "entries present with dim 0".into(),
            });
        }
        let entry_len = 32 + 4 * dim;
        if count.checked_mul(entry_len) != Some(bytes.len() - r.pos) {
            return Err(CacheError::Corrupt {
                offset: count_offset,
                reason: format!(
                    "{count} entries of {entry_len} bytes do not match the {} remaining bytes",
                    bytes.len() - r.pos
                ),
            });
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let hash = ContentHash(r.array("content hash")?);
            let value_offset = r.pos;
            let raw = r.take(4 * dim, "vector")?;
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect();
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(CacheError::Corrupt {
                    offset: value_offset + 4 * i,
                    reason: "non-finite value".into(),
                });
            }
            entries.push((hash, values));
        }
        Ok(Self {
            provider_id,
            dim,
            count,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(b: u8) -> ContentHash {
        ContentHash([b; 32])
    }

    #[test]
    fn dim_conflict_on_insert() {
        let c = EmbeddingCache::new();
        c.insert("p", h(1), vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            c.insert("p", h(2), vec![1.0]),
            Err(CacheError::DimConflict { .. })
        ));
        // other providers are independent
        c.insert("q", h(2), vec![1.0]).unwrap();
    }

    #[test]
    fn rejects_non_finite() {
        let c = EmbeddingCache::new();
        assert!(matches!(
            c.insert("p", h(1), vec![f32::NAN]),
            Err(CacheError::NonFinite)
        ));
        assert_eq!(c.len("p"), 0);
    }

    #[test]
    fn empty_cache_exports_valid_file() {
        let c = EmbeddingCache::new();
        let bytes = c.to_bytes("nobody");
        let parsed = CacheFile::parse(&bytes).unwrap();
        assert_eq!(parsed.count, 0);
        assert_eq!(parsed.provider_id, "nobody");
        assert_eq!(EmbeddingCache::new().import_bytes(&bytes).unwrap(), 0);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = EmbeddingCache::new();
        c.insert("p", h(9), vec![0.1, -0.0, f32::MIN_POSITIVE]).unwrap();
        c.insert("p", h(3), vec![1.5, 2.5, -3.25]).unwrap();
        let bytes = c.to_bytes("p");
        let d = EmbeddingCache::new();
        assert_eq!(d.import_bytes(&bytes).unwrap(), 2);
        for k in [h(9), h(3)] {
            let a: Vec<u32> = c.get("p", &k).unwrap().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = d.get("p", &k).unwrap().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(d.to_bytes("p"), bytes);
    }

    #[test]
    fn import_with_conflicting_dim_errors() {
        let c = EmbeddingCache::new();
        c.insert("p", h(1), vec![1.0, 2.0]).unwrap();
        let other = EmbeddingCache::new();
        other.insert("p", h(2), vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            c.import_bytes(&other.to_bytes("p")),
            Err(CacheError::DimConflict {
                existing: 2,
                incoming: 3,
                ..
            })
        ));
    }

    #[test]
    fn corrupt_files_report_offsets() {
        let c = EmbeddingCache::new();
        c.insert("p", h(1), vec![1.0, 2.0]).unwrap();
        let bytes = c.to_bytes("p");

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            CacheFile::parse(&bad_magic),
            Err(CacheError::Corrupt { offset: 0, .. })
        ));

        let truncated = &bytes[..bytes.len() - 3];
        let err = CacheFile::parse(truncated).unwrap_err();
        assert!(matches!(err, CacheError::Corrupt { offset: 15, .. }), "{err}");

        let mut nan = bytes.clone();
        let last = nan.len() - 4;
        nan[last..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            CacheFile::parse(&nan),
            Err(CacheError::Corrupt { offset, .. }) if offset == last
        ));

        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(CacheFile::parse(&version), Err(CacheError::Version(9))));
    }
}
