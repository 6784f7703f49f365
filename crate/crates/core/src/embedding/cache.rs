//! Content-addressed embedding cache with a binary on-disk form.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! u32 header_len | header JSON | count x (sha256(text) [32] | dim x f32) | sha256 of everything before [32]
//! ```
//!
//! The header carries the provider fingerprint, `dim` and `count`. Records
//! are written in hash order so identical caches serialize identically.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbeddingProvider, EmbeddingVector, Fingerprint};
use crate::error::{Error, Result};

const FORMAT: &str = "jobdup-embedding-cache";
const VERSION: u32 = 1;

type TextHash = [u8; 32];

fn text_hash(text: &str) -> TextHash {
    Sha256::digest(text.as_bytes()).into()
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    provider: String,
    dim: usize,
    count: usize,
}

#[derive(Debug)]
pub struct EmbeddingCache {
    fingerprint: Fingerprint,
    entries: RwLock<HashMap<TextHash, EmbeddingVector>>,
    dirty: AtomicBool,
}

impl EmbeddingCache {
    pub fn new(fingerprint: Fingerprint) -> Self {
        EmbeddingCache { fingerprint, entries: RwLock::default(), dirty: AtomicBool::new(false) }
    }

    pub fn for_provider(provider: &dyn EmbeddingProvider) -> Self {
        Self::new(provider.fingerprint())
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when entries were added since the last load or save.
    pub fn is_dirty(&self) -> bool {
        self.dirty.load(Ordering::Relaxed)
    }

    pub fn get(&self, text: &str) -> Option<EmbeddingVector> {
        self.entries.read().expect("cache lock poisoned").get(&text_hash(text)).cloned()
    }

    pub fn insert(&self, text: &str, vector: EmbeddingVector) -> Result<()> {
        if vector.dim() != self.fingerprint.dim {
            return Err(Error::Contract(format!(
                "vector dim {} does not match cache dim {}",
                vector.dim(),
                self.fingerprint.dim
            )));
        }
        self.entries.write().expect("cache lock poisoned").insert(text_hash(text), vector);
        self.dirty.store(true, Ordering::Relaxed);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let entries = self.entries.read().expect("cache lock poisoned");
        let mut keys: Vec<&TextHash> = entries.keys().collect();
        keys.sort_unstable();
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            provider: self.fingerprint.name.clone(),
            dim: self.fingerprint.dim,
            count: keys.len(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(4 + header.len() + keys.len() * (32 + 4 * self.fingerprint.dim) + 32);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for key in keys {
            out.extend_from_slice(key);
            for v in entries[key].values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let checksum: [u8; 32] = Sha256::digest(&out).into();
        out.extend_from_slice(&checksum);
        out
    }

    /// Parses a serialized cache; the fingerprint must match `expected`.
    pub fn from_bytes(bytes: &[u8], expected: &Fingerprint) -> Result<Self> {
        let corrupt = |msg: &str| Error::CacheCorrupt(msg.to_owned());
        if bytes.len() < 4 + 32 {
            return Err(corrupt("file too short"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - 32);
        let actual: [u8; 32] = Sha256::digest(body).into();
        if actual.as_slice() != checksum {
            return Err(corrupt("checksum mismatch"));
        }
        let header_len = u32::from_le_bytes(body[..4].try_into().expect("4 bytes")) as usize;
        let header_bytes = body.get(4..4 + header_len).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| Error::CacheCorrupt(format!("bad header: {e}")))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(corrupt("unknown format or version"));
        }
        let found = Fingerprint { name: header.provider, dim: header.dim };
        if &found != expected {
            return Err(Error::Config(format!(
                "embedding cache was built by provider {found}, configured provider is {expected}"
            )));
        }
        let record = 32 + 4 * header.dim;
        let records = &body[4 + header_len..];
        if records.len() != header.count * record {
            return Err(corrupt("record section length does not match header count"));
        }
        let mut entries = HashMap::with_capacity(header.count);
        for chunk in records.chunks_exact(record) {
            let key: TextHash = chunk[..32].try_into().expect("32 bytes");
            let values = chunk[32..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            let vector = EmbeddingVector::new(values).map_err(|e| Error::CacheCorrupt(e.to_string()))?;
            entries.insert(key, vector);
        }
        Ok(EmbeddingCache { fingerprint: found, entries: RwLock::new(entries), dirty: AtomicBool::new(false) })
    }

    /// Writes atomically (temp file + rename) and clears the dirty flag.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        self.dirty.store(false, Ordering::Relaxed);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, expected: &Fingerprint) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, expected)
    }

    /// Loads the cache at `path` if it exists, otherwise starts empty.
    pub fn load_or_new(path: impl AsRef<Path>, provider: &dyn EmbeddingProvider) -> Result<Self> {
        let path = path.as_ref();
        if path.exists() {
            Self::load(path, &provider.fingerprint())
        } else {
            Ok(Self::for_provider(provider))
        }
    }
}

/// Returns the cached vector for `text`, computing and storing it on a miss.
/// The empty text is the zero vector and is never sent to the provider.
pub fn embed_cached(text: &str, provider: &dyn EmbeddingProvider, cache: &EmbeddingCache) -> Result<EmbeddingVector> {
    let fingerprint = provider.fingerprint();
    if &fingerprint != cache.fingerprint() {
        return Err(Error::Config(format!(
            "provider {fingerprint} cannot use a cache built for {}",
            cache.fingerprint()
        )));
    }
    if text.is_empty() {
        return Ok(EmbeddingVector::zeros(fingerprint.dim));
    }
    if let Some(hit) = cache.get(text) {
        return Ok(hit);
    }
    let vector = provider.embed(text)?;
    if vector.dim() != fingerprint.dim {
        return Err(Error::ScoringUnavailable(format!(
            "provider returned dim {}, expected {}",
            vector.dim(),
            fingerprint.dim
        )));
    }
    cache.insert(text, vector.clone())?;
    Ok(vector)
}
