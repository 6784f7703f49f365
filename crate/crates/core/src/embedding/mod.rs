//! Embedding providers, the embedding cache and the clamped-cosine scores
//! (TES, SES, TTES, AES).

mod cache;
mod local;
mod remote;

pub use cache::{embed_cached, EmbeddingCache};
pub use local::LocalProvider;
pub use remote::RemoteProvider;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::NormalizedPosting;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Rejects non-finite entries.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("embedding contains non-finite value {bad}")));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

/// Identifies which provider produced a cache's vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub name: String,
    pub dim: usize,
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.name, self.dim)
    }
}

/// A deterministic text encoder. `embed("")` must return the zero vector.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }

    fn fingerprint(&self) -> Fingerprint {
        Fingerprint { name: self.name().to_owned(), dim: self.dim() }
    }
}

/// `max(0, cos(u, v))`; zero when either vector has zero norm.
pub fn cosine_clamped(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Contract(format!("dimension mismatch: {} vs {}", u.dim(), v.dim())));
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in u.values().iter().zip(v.values()) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        nu += x * x;
        nv += y * y;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    // sqrt(n * n) == n exactly, so cos(u, u) comes out as exactly 1
    let cos = dot / (nu * nv).sqrt();
    Ok(if cos.is_nan() { 0.0 } else { cos.clamp(0.0, 1.0) })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingScores {
    pub tes: f64,
    pub ses: f64,
    pub ttes: f64,
    pub aes: f64,
}

fn text_score(a: &str, b: &str, provider: &dyn EmbeddingProvider, cache: &EmbeddingCache) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let ea = embed_cached(a, provider, cache)?;
    let eb = embed_cached(b, provider, cache)?;
    cosine_clamped(&ea, &eb)
}

pub fn embedding_scores(
    a: &NormalizedPosting,
    b: &NormalizedPosting,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
) -> Result<EmbeddingScores> {
    let all = |p: &NormalizedPosting| {
        if p.norm_title.is_empty() && p.norm_description.is_empty() && p.skill_text.is_empty() {
            String::new()
        } else {
            p.all_text()
        }
    };
    Ok(EmbeddingScores {
        tes: text_score(&a.norm_description, &b.norm_description, provider, cache)?,
        ses: text_score(&a.skill_text, &b.skill_text, provider, cache)?,
        ttes: text_score(&a.norm_title, &b.norm_title, provider, cache)?,
        aes: text_score(&all(a), &all(b), provider, cache)?,
    })
}
