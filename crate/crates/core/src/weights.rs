//! Inverse document frequency skill weights and the Weighted Skill Score.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::NormalizedPosting;

/// Weight of a term missing from the table (as if seen in one posting).
pub const UNSEEN_WEIGHT: f64 = 1.0;

/// Immutable snapshot of document frequencies. Weights are always derived as
/// `1 / freq`, never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillWeights {
    freq: BTreeMap<String, u64>,
    corpus_size: u64,
    built_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    corpus_size: u64,
    freq: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    built_at: Option<DateTime<Utc>>,
}

impl SkillWeights {
    /// Document frequency of every term over `corpus`.
    pub fn compute<'a>(corpus: impl IntoIterator<Item = &'a NormalizedPosting>) -> Result<Self> {
        let empty = SkillWeights { freq: BTreeMap::new(), corpus_size: 0, built_at: Utc::now() };
        let weights = empty.update(corpus);
        if weights.corpus_size == 0 {
            return Err(Error::Config("cannot build skill weights from an empty corpus".into()));
        }
        Ok(weights)
    }

    /// Same table `compute` would give over the old corpus plus `new_postings`.
    pub fn update<'a>(&self, new_postings: impl IntoIterator<Item = &'a NormalizedPosting>) -> Self {
        let mut freq = self.freq.clone();
        let mut corpus_size = self.corpus_size;
        for posting in new_postings {
            corpus_size += 1;
            for term in &posting.distinct_skills {
                *freq.entry(term.clone()).or_default() += 1;
            }
        }
        SkillWeights { freq, corpus_size, built_at: Utc::now() }
    }

    pub fn corpus_size(&self) -> u64 {
        self.corpus_size
    }

    pub fn built_at(&self) -> DateTime<Utc> {
        self.built_at
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    pub fn freq(&self, term: &str) -> Option<u64> {
        self.freq.get(term).copied()
    }

    pub fn weight(&self, term: &str) -> f64 {
        match self.freq.get(term) {
            Some(&f) => 1.0 / f as f64,
            None => UNSEEN_WEIGHT,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, u64)> {
        self.freq.iter().map(|(t, f)| (t.as_str(), *f))
    }

    pub fn to_json(&self) -> String {
        let file = WeightsFile {
            corpus_size: self.corpus_size,
            freq: self.freq.clone(),
            built_at: Some(self.built_at),
        };
        serde_json::to_string_pretty(&file).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightsFile = serde_json::from_str(text)?;
        if let Some((term, f)) = file.freq.iter().find(|(_, f)| **f == 0 || **f > file.corpus_size) {
            return Err(Error::Invalid(format!(
                "weights file: frequency {f} of `{term}` outside 1..={}",
                file.corpus_size
            )));
        }
        Ok(SkillWeights {
            freq: file.freq,
            corpus_size: file.corpus_size,
            built_at: file.built_at.unwrap_or_else(Utc::now),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WssResult {
    pub forward: f64,
    pub backward: f64,
    #[serde(rename = "final")]
    pub score: f64,
}

fn directional(source: &BTreeSet<String>, shared: f64, weights: &SkillWeights) -> f64 {
    if source.is_empty() {
        return 0.0;
    }
    let total: f64 = source.iter().map(|s| weights.weight(s)).sum();
    shared / total
}

/// Weighted Skill Score: shared-term weight over source-term weight, averaged
/// over both directions.
pub fn wss_sets(a: &BTreeSet<String>, b: &BTreeSet<String>, weights: &SkillWeights) -> WssResult {
    let shared: f64 = a.intersection(b).map(|s| weights.weight(s)).sum();
    let forward = directional(a, shared, weights);
    let backward = directional(b, shared, weights);
    WssResult { forward, backward, score: (forward + backward) / 2.0 }
}

pub fn wss(a: &NormalizedPosting, b: &NormalizedPosting, weights: &SkillWeights) -> WssResult {
    wss_sets(&a.distinct_skills, &b.distinct_skills, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn np(skills: &[&str]) -> NormalizedPosting {
        NormalizedPosting {
            posting_id: skills.join("+"),
            norm_title: String::new(),
            norm_description: String::new(),
            skill_occurrences: Vec::new(),
            skill_text: skills.join(" "),
            distinct_skills: set(skills),
        }
    }

    fn set(terms: &[&str]) -> BTreeSet<String> {
        terms.iter().map(|s| s.to_string()).collect()
    }

    fn table(entries: &[(&str, u64)], corpus_size: u64) -> SkillWeights {
        SkillWeights {
            freq: entries.iter().map(|(t, f)| (t.to_string(), *f)).collect(),
            corpus_size,
            built_at: Utc::now(),
        }
    }

    #[test]
    fn document_frequency_weights() {
        let corpus = [np(&["java", "s/4 hana"]), np(&["java"]), np(&["java", "sql"]), np(&["java"])];
        let w = SkillWeights::compute(&corpus).unwrap();
        assert_eq!(w.weight("java"), 0.25);
        assert_eq!(w.weight("s/4 hana"), 1.0);
        assert_eq!(w.corpus_size(), 4);

        let w = SkillWeights::compute(&[np(&["a", "b"])]).unwrap();
        assert_eq!((w.weight("a"), w.weight("b")), (1.0, 1.0));

        let w = SkillWeights::compute(&[np(&["x"]), np(&["x", "y"])]).unwrap();
        assert_eq!(w.weight("x"), 0.5);
    }

    #[test]
    fn repeated_mentions_count_once() {
        let mut p = np(&["java"]);
        p.skill_text = "java java java".into();
        let w = SkillWeights::compute(&[p, np(&["go"])]).unwrap();
        assert_eq!(w.freq("java"), Some(1));
    }

    #[test]
    fn empty_corpus_is_config_error() {
        assert!(matches!(SkillWeights::compute(&[]), Err(Error::Config(_))));
    }

    #[test]
    fn incremental_update() {
        let corpus = [np(&["java", "s/4 hana"]), np(&["java"]), np(&["java"]), np(&["java"])];
        let w = SkillWeights::compute(&corpus).unwrap();
        let more = w.update(&[np(&["java"])]);
        assert_eq!(more.freq("java"), Some(5));
        assert_eq!(more.weight("java"), 0.2);

        let blank = w.update(&[np(&[])]);
        assert_eq!(blank.corpus_size(), 5);
        assert_eq!(blank.freq, w.freq);

        let same = w.update(&[]);
        assert_eq!((same.freq.clone(), same.corpus_size()), (w.freq.clone(), w.corpus_size()));
    }

    #[test]
    fn update_equals_full_recompute() {
        let old = [np(&["a", "b"]), np(&["b"])];
        let new = [np(&["b", "c"]), np(&[])];
        let all: Vec<_> = old.iter().chain(&new).cloned().collect();
        let incremental = SkillWeights::compute(&old).unwrap().update(&new);
        let full = SkillWeights::compute(&all).unwrap();
        assert_eq!(incremental.freq, full.freq);
        assert_eq!(incremental.corpus_size, full.corpus_size);
    }

    #[test]
    fn wss_hand_example() {
        let w = table(&[("a", 1), ("b", 2), ("c", 4)], 4);
        let r = wss_sets(&set(&["a", "b"]), &set(&["b", "c"]), &w);
        assert!((r.forward - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.backward - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.score - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wss_identical_disjoint_empty() {
        let w = table(&[("a", 3), ("b", 1)], 5);
        assert_eq!(wss_sets(&set(&["a", "b"]), &set(&["a", "b"]), &w).score, 1.0);
        assert_eq!(wss_sets(&set(&["a"]), &set(&["b"]), &w).score, 0.0);
        let r = wss_sets(&set(&[]), &set(&["b"]), &w);
        assert_eq!((r.forward, r.backward, r.score), (0.0, 0.0, 0.0));
        assert_eq!(wss_sets(&set(&[]), &set(&[]), &w).score, 0.0);
    }

    #[test]
    fn unseen_terms_weigh_one() {
        let w = table(&[("java", 4)], 4);
        let r = wss_sets(&set(&["java", "cobol"]), &set(&["cobol"]), &w);
        assert_eq!(r.forward, 1.0 / 1.25);
        assert_eq!(r.backward, 1.0);
    }

    #[test]
    fn json_round_trip_recomputes_weights() {
        let w = table(&[("java", 4), ("sap", 1)], 10);
        let back = SkillWeights::from_json(&w.to_json()).unwrap();
        assert_eq!(back.freq, w.freq);
        assert_eq!(back.weight("java"), 0.25);
        let raw: serde_json::Value = serde_json::from_str(&w.to_json()).unwrap();
        assert_eq!(raw["corpus_size"], 10);
        assert_eq!(raw["freq"]["java"], 4);
    }

    #[test]
    fn json_rejects_bad_frequencies() {
        assert!(SkillWeights::from_json(r#"{"corpus_size": 2, "freq": {"a": 3}}"#).is_err());
        assert!(SkillWeights::from_json(r#"{"corpus_size": 2, "freq": {"a": 0}}"#).is_err());
    }

    fn instance() -> impl Strategy<Value = (BTreeSet<String>, BTreeSet<String>, Vec<u64>)> {
        let terms = || prop::collection::btree_set(0usize..12, 0..=8);
        (terms(), terms(), prop::collection::vec(1u64..=20, 12)).prop_map(|(a, b, f)| {
            let name = |i: &usize| format!("t{i}");
            (a.iter().map(name).collect(), b.iter().map(name).collect(), f)
        })
    }

    fn weights_from(freqs: &[u64]) -> SkillWeights {
        SkillWeights {
            freq: freqs.iter().enumerate().map(|(i, f)| (format!("t{i}"), *f)).collect(),
            corpus_size: 20,
            built_at: Utc::now(),
        }
    }

    proptest! {
        #[test]
        fn wss_bounded_and_symmetric((a, b, f) in instance()) {
            let w = weights_from(&f);
            let ab = wss_sets(&a, &b, &w);
            let ba = wss_sets(&b, &a, &w);
            prop_assert_eq!(ab.score, ba.score);
            for v in [ab.forward, ab.backward, ab.score] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn adding_common_term_never_lowers_forward((a, b, f) in instance(), extra_freq in 1u64..=20) {
            let mut w = weights_from(&f);
            w.freq.insert("shared".into(), extra_freq);
            let before = wss_sets(&a, &b, &w).forward;
            let (mut a2, mut b2) = (a.clone(), b.clone());
            a2.insert("shared".into());
            b2.insert("shared".into());
            prop_assert!(wss_sets(&a2, &b2, &w).forward + 1e-12 >= before);
        }
    }
}
