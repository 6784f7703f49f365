//! Pair scoring, the total score, decision rules and dedup runs.

mod groups;
mod log;

pub use groups::{duplicate_groups, GroupSummary};
pub use log::DecisionLog;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::embedding::{embedding_scores, EmbeddingCache, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::overlap::{self, MatchBlock};
use crate::preprocess::{build_normalized, NormalizedPosting};
use crate::store::{JobPosting, PostingStore, SkillLexicon, DEFAULT_WINDOW_DAYS};
use crate::weights::{self, SkillWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreName {
    Tos,
    Sos,
    Tes,
    Ses,
    Ttes,
    Aes,
    Wss,
    Ts,
}

impl ScoreName {
    pub const ALL: [ScoreName; 8] = [
        ScoreName::Tos,
        ScoreName::Sos,
        ScoreName::Tes,
        ScoreName::Ses,
        ScoreName::Ttes,
        ScoreName::Aes,
        ScoreName::Wss,
        ScoreName::Ts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreName::Tos => "tos",
            ScoreName::Sos => "sos",
            ScoreName::Tes => "tes",
            ScoreName::Ses => "ses",
            ScoreName::Ttes => "ttes",
            ScoreName::Aes => "aes",
            ScoreName::Wss => "wss",
            ScoreName::Ts => "ts",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScoreName::Tos => "Text Overlap (TOS)",
            ScoreName::Sos => "Skill Overlap (SOS)",
            ScoreName::Tes => "Text Embedding (TES)",
            ScoreName::Ses => "Skill Embedding (SES)",
            ScoreName::Ttes => "Title Embedding (TTES)",
            ScoreName::Aes => "All Text Embedding (AES)",
            ScoreName::Wss => "Weighted Skill (WSS)",
            ScoreName::Ts => "Total Score (TS)",
        }
    }
}

impl fmt::Display for ScoreName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown score `{s}` (expected one of tos, sos, tes, ses, ttes, aes, wss, ts)")))
    }
}

/// Rounds to 6 decimal places, the precision of every serialized score.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn ser_round6<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    #[serde(serialize_with = "ser_round6")]
    pub tos: f64,
    #[serde(serialize_with = "ser_round6")]
    pub sos: f64,
    #[serde(serialize_with = "ser_round6")]
    pub tes: f64,
    #[serde(serialize_with = "ser_round6")]
    pub ses: f64,
    #[serde(serialize_with = "ser_round6")]
    pub ttes: f64,
    #[serde(serialize_with = "ser_round6")]
    pub aes: f64,
    #[serde(serialize_with = "ser_round6")]
    pub wss: f64,
    #[serde(serialize_with = "ser_round6")]
    pub ts: f64,
    /// Forward-pass description blocks, char offsets into the normalized
    /// descriptions of `id_a` (source) and `id_b` (target).
    #[serde(default)]
    pub blocks: Vec<MatchBlock>,
}

/// Mean of the three skill-based scores.
pub fn total_score(sos: f64, ses: f64, wss: f64) -> f64 {
    (sos + ses + wss) / 3.0
}

impl ScoreBreakdown {
    /// Builds a breakdown from the seven component scores; `ts` is derived.
    #[allow(clippy::too_many_arguments)]
    pub fn from_components(tos: f64, sos: f64, tes: f64, ses: f64, ttes: f64, aes: f64, wss: f64) -> Self {
        ScoreBreakdown { tos, sos, tes, ses, ttes, aes, wss, ts: total_score(sos, ses, wss), blocks: Vec::new() }
    }

    pub fn get(&self, name: ScoreName) -> f64 {
        match name {
            ScoreName::Tos => self.tos,
            ScoreName::Sos => self.sos,
            ScoreName::Tes => self.tes,
            ScoreName::Ses => self.ses,
            ScoreName::Ttes => self.ttes,
            ScoreName::Aes => self.aes,
            ScoreName::Wss => self.wss,
            ScoreName::Ts => self.ts,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Validation,
    Production,
}

/// Which scores the production floor applies to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorScope {
    /// sos, ses and wss only.
    #[default]
    TsComponents,
    /// All seven individual scores.
    AllScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub mode: Mode,
    pub ts_threshold: f64,
    pub component_floor: f64,
    #[serde(default)]
    pub floor_scope: FloorScope,
    /// Thresholds for single-score evaluation runs.
    #[serde(default = "table_thresholds")]
    pub per_score_thresholds: BTreeMap<ScoreName, f64>,
    #[serde(default = "default_window")]
    pub window_days: u32,
}

fn default_window() -> u32 {
    DEFAULT_WINDOW_DAYS
}

/// Per-score thresholds found on the labeled validation pairs.
pub fn table_thresholds() -> BTreeMap<ScoreName, f64> {
    BTreeMap::from([
        (ScoreName::Tos, 0.40),
        (ScoreName::Sos, 0.40),
        (ScoreName::Tes, 0.50),
        (ScoreName::Ses, 0.50),
        (ScoreName::Ttes, 0.50),
        (ScoreName::Aes, 0.50),
        (ScoreName::Wss, 0.20),
        (ScoreName::Ts, 0.35),
    ])
}

impl ThresholdConfig {
    /// Validation-set operating point: `ts >= 0.35`.
    pub fn validation() -> Self {
        ThresholdConfig {
            mode: Mode::Validation,
            ts_threshold: 0.35,
            component_floor: 0.0,
            floor_scope: FloorScope::TsComponents,
            per_score_thresholds: table_thresholds(),
            window_days: DEFAULT_WINDOW_DAYS,
        }
    }

    /// Deployed operating point: `ts >= 0.6` and every TS component `>= 0.1`.
    pub fn production() -> Self {
        ThresholdConfig { mode: Mode::Production, ts_threshold: 0.6, component_floor: 0.1, ..Self::validation() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("threshold {name} = {v} is outside [0, 1]")))
            }
        };
        unit("ts_threshold", self.ts_threshold)?;
        unit("component_floor", self.component_floor)?;
        for (name, v) in &self.per_score_thresholds {
            unit(name.as_str(), *v)?;
        }
        Ok(())
    }

    pub fn threshold_for(&self, name: ScoreName) -> f64 {
        match name {
            ScoreName::Ts => self.ts_threshold,
            other => self.per_score_thresholds.get(&other).copied().unwrap_or(self.ts_threshold),
        }
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self::production()
    }
}

/// Duplicate verdict for one breakdown. All comparisons are inclusive.
pub fn decide(b: &ScoreBreakdown, config: &ThresholdConfig) -> bool {
    if b.ts < config.ts_threshold {
        return false;
    }
    match config.mode {
        Mode::Validation => true,
        Mode::Production => {
            let floor = config.component_floor;
            let ts_parts_ok = [b.sos, b.ses, b.wss].iter().all(|v| *v >= floor);
            match config.floor_scope {
                FloorScope::TsComponents => ts_parts_ok,
                FloorScope::AllScores => ts_parts_ok && [b.tos, b.tes, b.ttes, b.aes].iter().all(|v| *v >= floor),
            }
        }
    }
}

/// Computes all seven scores and the total score for `(a, b)`.
pub fn score_pair(
    a: &NormalizedPosting,
    b: &NormalizedPosting,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
    weights: &SkillWeights,
) -> Result<ScoreBreakdown> {
    let tos = overlap::tos(a, b);
    let sos = overlap::sos(a, b);
    let emb = embedding_scores(a, b, provider, cache)?;
    let wss = weights::wss(a, b, weights);
    let mut breakdown =
        ScoreBreakdown::from_components(tos.score, sos.score, emb.tes, emb.ses, emb.ttes, emb.aes, wss.score);
    breakdown.blocks = tos.blocks;
    Ok(breakdown)
}

/// Everything a dedup run needs besides the store and thresholds.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub lexicon: &'a SkillLexicon,
    pub provider: &'a dyn EmbeddingProvider,
    pub cache: &'a EmbeddingCache,
    pub weights: &'a SkillWeights,
}

impl Scorer<'_> {
    pub fn normalize(&self, posting: &JobPosting) -> NormalizedPosting {
        build_normalized(posting, self.lexicon)
    }

    pub fn score(&self, a: &NormalizedPosting, b: &NormalizedPosting) -> Result<ScoreBreakdown> {
        score_pair(a, b, self.provider, self.cache, self.weights)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    #[default]
    Unreviewed,
    Confirmed,
    Rejected,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionStatus {
    #[default]
    Scored,
    /// Scoring failed (e.g. embedding provider outage); no verdict.
    Unscored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub id_a: String,
    pub id_b: String,
    #[serde(default)]
    pub status: DecisionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<ScoreBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub is_duplicate: bool,
    pub config_snapshot: ThresholdConfig,
    pub decided_at: DateTime<Utc>,
    #[serde(default)]
    pub review: ReviewStatus,
}

impl MatchDecision {
    pub fn scored(
        id_a: impl Into<String>,
        id_b: impl Into<String>,
        breakdown: ScoreBreakdown,
        config: &ThresholdConfig,
        decided_at: DateTime<Utc>,
    ) -> Self {
        MatchDecision {
            id_a: id_a.into(),
            id_b: id_b.into(),
            status: DecisionStatus::Scored,
            is_duplicate: decide(&breakdown, config),
            breakdown: Some(breakdown),
            error: None,
            config_snapshot: config.clone(),
            decided_at,
            review: ReviewStatus::Unreviewed,
        }
    }

    pub fn unscored(
        id_a: impl Into<String>,
        id_b: impl Into<String>,
        error: String,
        config: &ThresholdConfig,
        decided_at: DateTime<Utc>,
    ) -> Self {
        MatchDecision {
            id_a: id_a.into(),
            id_b: id_b.into(),
            status: DecisionStatus::Unscored,
            breakdown: None,
            error: Some(error),
            is_duplicate: false,
            config_snapshot: config.clone(),
            decided_at,
            review: ReviewStatus::Unreviewed,
        }
    }

    pub fn key(&self) -> (String, String) {
        (self.id_a.clone(), self.id_b.clone())
    }

    pub fn involves(&self, id: &str) -> bool {
        self.id_a == id || self.id_b == id
    }
}

/// Orders a pair so that `id_a < id_b`.
pub fn pair_key(x: &str, y: &str) -> (String, String) {
    if x <= y {
        (x.to_owned(), y.to_owned())
    } else {
        (y.to_owned(), x.to_owned())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DedupOutcome {
    /// Sorted by `(id_a, id_b)`.
    pub decisions: Vec<MatchDecision>,
    pub comparisons: usize,
    pub duplicates: usize,
    pub unscored: usize,
}

/// Scores every posting in `new_ids` against its time-window candidates.
///
/// Each unordered pair is scored once, with the smaller id as source.
/// Scoring failures become unscored decisions; the run itself only fails on
/// unknown ids.
pub fn run_dedup(
    new_ids: &[String],
    store: &PostingStore,
    config: &ThresholdConfig,
    scorer: &Scorer<'_>,
    decided_at: DateTime<Utc>,
) -> Result<DedupOutcome> {
    let mut pairs = BTreeSet::new();
    for id in new_ids {
        for candidate in store.candidates(id, config.window_days)? {
            pairs.insert(pair_key(id, &candidate.id));
        }
    }

    let involved: BTreeSet<&str> = pairs.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
    let normalized: HashMap<&str, NormalizedPosting> = involved
        .into_par_iter()
        .map(|id| (id, scorer.normalize(store.get(id).expect("candidate ids come from the store"))))
        .collect();

    let pairs: Vec<&(String, String)> = pairs.iter().collect();
    let decisions: Vec<MatchDecision> = pairs
        .par_iter()
        .map(|&(a, b)| match scorer.score(&normalized[a.as_str()], &normalized[b.as_str()]) {
            Ok(breakdown) => MatchDecision::scored(a, b, breakdown, config, decided_at),
            Err(e) => {
                ::log::warn!("pair ({a}, {b}) unscored: {e}");
                MatchDecision::unscored(a, b, e.to_string(), config, decided_at)
            }
        })
        .collect();

    Ok(DedupOutcome {
        comparisons: decisions.len(),
        duplicates: decisions.iter().filter(|d| d.is_duplicate).count(),
        unscored: decisions.iter().filter(|d| d.status == DecisionStatus::Unscored).count(),
        decisions,
    })
}
