use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for an external sentence-embedding service.
///
/// Wire format: `POST {"texts": [...]}` answered by `{"vectors": [[...], ...]}`,
/// one vector per text in request order. Transport failures and malformed
/// answers surface as [`Error::ScoringUnavailable`].
#[derive(Debug)]
pub struct RemoteProvider {
    name: String,
    endpoint: String,
    dim: usize,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        RemoteProvider { name: name.into(), endpoint: endpoint.into(), dim, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let unavailable = |msg: String| Error::ScoringUnavailable(format!("{}: {msg}", self.endpoint));
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { texts })
            .map_err(|e| unavailable(e.to_string()))?;
        let parsed: EmbedResponse = response.body_mut().read_json().map_err(|e| unavailable(e.to_string()))?;
        if parsed.vectors.len() != texts.len() {
            return Err(unavailable(format!(
                "expected {} vectors, got {}",
                texts.len(),
                parsed.vectors.len()
            )));
        }
        parsed
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(unavailable(format!("expected dim {}, got {}", self.dim, v.len())));
                }
                EmbeddingVector::new(v).map_err(|e| unavailable(e.to_string()))
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let wanted: Vec<&str> = texts.iter().copied().filter(|t| !t.is_empty()).collect();
        let mut fetched = if wanted.is_empty() { Vec::new() } else { self.request(&wanted)? }.into_iter();
        Ok(texts
            .iter()
            .map(|t| {
                if t.is_empty() {
                    EmbeddingVector::zeros(self.dim)
                } else {
                    fetched.next().expect("one vector per non-empty text")
                }
            })
            .collect())
    }
}
