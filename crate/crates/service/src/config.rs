//! Service configuration, read from one TOML file.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! dedup_interval_secs = 300
//!
//! [paths]
//! postings = "data/postings.jsonl"
//! skills = "data/skills.txt"
//! blacklist = "data/blacklist.txt"
//! weights = "data/weights.json"
//! decisions = "data/decisions.jsonl"
//! reviews = "data/reviews.jsonl"
//! embedding_cache = "data/embeddings.bin"
//!
//! [provider]
//! kind = "local"
//! dim = 256
//! seed = 0
//!
//! [thresholds]
//! mode = "production"
//! ts_threshold = 0.6
//! component_floor = 0.1
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! `JOBDUP_LISTEN` overrides `listen`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use jobdup_core::embedding::{EmbeddingProvider, LocalProvider, RemoteProvider};
use jobdup_core::pipeline::ThresholdConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const LISTEN_ENV: &str = "JOBDUP_LISTEN";
const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub postings: PathBuf,
    pub skills: PathBuf,
    #[serde(default)]
    pub blacklist: Option<PathBuf>,
    pub weights: PathBuf,
    pub decisions: PathBuf,
    pub reviews: PathBuf,
    pub embedding_cache: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Local {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Remote {
        endpoint: String,
        dim: usize,
        /// Fingerprint name; changing it invalidates the embedding cache.
        name: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_dim() -> usize {
    256
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Local { dim: default_dim(), seed: 0 }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderConfig::Local { dim, seed } => Box::new(LocalProvider::new(*dim, *seed)?),
            ProviderConfig::Remote { endpoint, dim, name, timeout_ms } => {
                Box::new(RemoteProvider::new(name, endpoint, *dim, Duration::from_millis(*timeout_ms)))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Period of the background dedup job in `serve`; 0 disables it.
    #[serde(default)]
    pub dedup_interval_secs: u64,
    pub paths: Paths,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
}

fn default_listen() -> String {
    DEFAULT_LISTEN.into()
}

impl ServiceConfig {
    /// Parses, resolves relative paths against `base` and validates.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ServiceConfig =
            toml::from_str(text).map_err(|e| ServiceError::Config(format!("config: {e}")))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, base)?;
        if let Ok(listen) = std::env::var(LISTEN_ENV) {
            cfg.listen = listen;
        }
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.postings,
            &mut paths.skills,
            &mut paths.weights,
            &mut paths.decisions,
            &mut paths.reviews,
            &mut paths.embedding_cache,
        ] {
            fix(p);
        }
        if let Some(p) = &mut paths.blacklist {
            fix(p);
        }
    }

    /// Thresholds in range, the skill list present, and every data file's
    /// directory existing.
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        if !self.paths.skills.is_file() {
            return Err(ServiceError::Config(format!("skill list {} not found", self.paths.skills.display())));
        }
        let paths = &self.paths;
        for p in [&paths.postings, &paths.weights, &paths.decisions, &paths.reviews, &paths.embedding_cache] {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !dir.is_dir() {
                return Err(ServiceError::Config(format!("directory {} for {} does not exist", dir.display(), p.display())));
            }
        }
        Ok(())
    }
}
