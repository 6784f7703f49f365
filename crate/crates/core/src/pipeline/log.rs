use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{pair_key, MatchDecision, ReviewStatus};
use crate::error::{Error, Result};

/// The persisted set of decisions, one JSON object per line, sorted by
/// `(id_a, id_b)`. A re-scored pair replaces its old decision but keeps the
/// old review status.
#[derive(Debug, Default)]
pub struct DecisionLog {
    path: Option<PathBuf>,
    decisions: BTreeMap<(String, String), MatchDecision>,
}

impl DecisionLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut log = DecisionLog { path: Some(path.clone()), decisions: BTreeMap::new() };
        if !path.exists() {
            return Ok(log);
        }
        let reader = BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let decision: MatchDecision = serde_json::from_str(&line)
                .map_err(|e| Error::Invalid(format!("{}:{}: {e}", path.display(), n + 1)))?;
            log.decisions.insert(decision.key(), decision);
        }
        Ok(log)
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MatchDecision> {
        self.decisions.values()
    }

    /// Looks a pair up in either order.
    pub fn get(&self, x: &str, y: &str) -> Option<&MatchDecision> {
        self.decisions.get(&pair_key(x, y))
    }

    pub fn for_posting<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a MatchDecision> + 'a {
        self.decisions.values().filter(move |d| d.involves(id))
    }

    pub fn merge(&mut self, decisions: impl IntoIterator<Item = MatchDecision>) {
        for mut d in decisions {
            if let Some(old) = self.decisions.get(&d.key()) {
                d.review = old.review;
            }
            self.decisions.insert(d.key(), d);
        }
    }

    /// Sets the review status of an existing decision.
    pub fn set_review(&mut self, x: &str, y: &str, review: ReviewStatus) -> Option<&MatchDecision> {
        let d = self.decisions.get_mut(&pair_key(x, y))?;
        d.review = review;
        Some(d)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in self.decisions.values() {
            out.push_str(&serde_json::to_string(d).expect("decision serializes"));
            out.push('\n');
        }
        out
    }

    /// Rewrites the whole file atomically. No-op for in-memory logs.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let tmp = path.with_extension("jsonl.tmp");
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}
