//! Shared state behind both the CLI verbs and the HTTP handlers.
//!
//! Ingestion, weight rebuilds and dedup runs take the job lock, so at most
//! one of them runs at a time; reads only take the per-resource read locks.

use std::collections::{BTreeSet, HashMap};
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use jobdup_core::embedding::{EmbeddingCache, EmbeddingProvider};
use jobdup_core::eval::Breakdowns;
use jobdup_core::pipeline::{
    duplicate_groups, pair_key, run_dedup, DecisionLog, DecisionStatus, MatchDecision, ReviewStatus,
    ScoreBreakdown, Scorer, ThresholdConfig,
};
use jobdup_core::preprocess::{build_normalized, NormalizedPosting};
use jobdup_core::store::{IngestReport, JobPosting, LabeledPair, PostingStore, SkillLexicon};
use jobdup_core::weights::SkillWeights;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ServiceConfig;
use crate::error::{Result, ServiceError};

fn read<T>(lock: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    lock.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(lock: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    lock.write().unwrap_or_else(|e| e.into_inner())
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Which postings a dedup run compares against their candidates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    All,
    /// Postings published on or after the date.
    Since(NaiveDate),
    Ids(Vec<String>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupSummary {
    pub postings: usize,
    pub comparisons: usize,
    pub duplicates: usize,
    pub unscored: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Confirmed,
    Rejected,
}

impl From<Verdict> for ReviewStatus {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Confirmed => ReviewStatus::Confirmed,
            Verdict::Rejected => ReviewStatus::Rejected,
        }
    }
}

/// One reviewer verdict, appended to the reviews file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewFeedback {
    pub id_a: String,
    pub id_b: String,
    pub verdict: Verdict,
    pub reviewer: String,
    pub submitted_at: DateTime<Utc>,
}

/// Queue filter; `All` lists every flagged pair whatever its review state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueStatus {
    #[default]
    Unreviewed,
    Confirmed,
    Rejected,
    All,
}

impl QueueStatus {
    fn admits(self, review: ReviewStatus) -> bool {
        match self {
            QueueStatus::All => true,
            QueueStatus::Unreviewed => review == ReviewStatus::Unreviewed,
            QueueStatus::Confirmed => review == ReviewStatus::Confirmed,
            QueueStatus::Rejected => review == ReviewStatus::Rejected,
        }
    }
}

/// A posting as the review console shows it. Block offsets index
/// `norm_description` in chars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostingView {
    pub id: String,
    pub title: String,
    pub description: String,
    pub published_at: NaiveDate,
    pub source: String,
    pub norm_title: String,
    pub norm_description: String,
    pub skill_text: String,
}

impl PostingView {
    fn new(posting: &JobPosting, normalized: NormalizedPosting) -> Self {
        PostingView {
            id: posting.id.clone(),
            title: posting.title.clone(),
            description: posting.description.clone(),
            published_at: posting.published_at,
            source: posting.source.clone(),
            norm_title: normalized.norm_title,
            norm_description: normalized.norm_description,
            skill_text: normalized.skill_text,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub id_a: String,
    pub id_b: String,
    pub review: ReviewStatus,
    pub breakdown: ScoreBreakdown,
    pub posting_a: PostingView,
    pub posting_b: PostingView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageCursor {
    pub after_a: String,
    pub after_b: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueuePage {
    /// Items matching the filter, across all pages.
    pub total: usize,
    pub items: Vec<QueueItem>,
    /// Pass back as `after_a`/`after_b` to fetch the next page.
    pub next: Option<PageCursor>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub postings: usize,
    pub comparisons: usize,
    pub duplicates: usize,
    pub unscored: usize,
    pub unreviewed: usize,
    pub confirmed: usize,
    pub rejected: usize,
    pub groups: usize,
    pub mean_group_size: f64,
    pub grouped_postings: usize,
    pub unique_postings: usize,
}

pub struct App {
    config: ServiceConfig,
    lexicon: SkillLexicon,
    provider: Box<dyn EmbeddingProvider>,
    cache: EmbeddingCache,
    store: RwLock<PostingStore>,
    weights: RwLock<Option<Arc<SkillWeights>>>,
    log: RwLock<DecisionLog>,
    job: Mutex<()>,
    pending: Mutex<BTreeSet<String>>,
}

impl App {
    pub fn open(config: ServiceConfig) -> Result<Self> {
        let paths = &config.paths;
        let lexicon = SkillLexicon::load(&paths.skills, paths.blacklist.as_deref())?;
        let provider = config.provider.build()?;
        let cache = EmbeddingCache::load_or_new(&paths.embedding_cache, provider.as_ref())?;
        let store = PostingStore::open(&paths.postings)?;
        let weights = if paths.weights.exists() { Some(Arc::new(SkillWeights::load(&paths.weights)?)) } else { None };
        let log = DecisionLog::open(&paths.decisions)?;
        Ok(App {
            lexicon,
            provider,
            cache,
            store: RwLock::new(store),
            weights: RwLock::new(weights),
            log: RwLock::new(log),
            job: Mutex::new(()),
            pending: Mutex::new(BTreeSet::new()),
            config,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn thresholds(&self) -> &ThresholdConfig {
        &self.config.thresholds
    }

    fn normalize(&self, posting: &JobPosting) -> NormalizedPosting {
        build_normalized(posting, &self.lexicon)
    }

    /// Ingests JSONL, updates the skill weights with the accepted postings
    /// and queues them for the next dedup run.
    pub fn ingest_jsonl(&self, reader: impl BufRead) -> Result<IngestReport> {
        self.ingest_with(|store| store.ingest(reader))
    }

    pub fn ingest_values(&self, values: Vec<Value>) -> Result<IngestReport> {
        self.ingest_with(|store| store.ingest_values(values))
    }

    /// Accepts a JSON array of postings or JSONL.
    pub fn ingest_body(&self, body: &str) -> Result<IngestReport> {
        if body.trim_start().starts_with('[') {
            let values: Vec<Value> = serde_json::from_str(body)
                .map_err(|e| ServiceError::BadRequest(format!("body is not a JSON array of postings: {e}")))?;
            self.ingest_values(values)
        } else {
            self.ingest_jsonl(body.as_bytes())
        }
    }

    fn ingest_with(
        &self,
        f: impl FnOnce(&mut PostingStore) -> jobdup_core::Result<IngestReport>,
    ) -> Result<IngestReport> {
        let _job = lock(&self.job);
        let mut store = write(&self.store);
        let report = f(&mut store)?;
        if report.accepted > 0 {
            let previous = read(&self.weights).clone();
            let updated = match previous {
                Some(w) => {
                    let added: Vec<_> = report
                        .accepted_ids
                        .iter()
                        .filter_map(|id| store.get(id))
                        .map(|p| self.normalize(p))
                        .collect();
                    w.update(&added)
                }
                None => self.compute_weights(&store)?,
            };
            updated.save(&self.config.paths.weights)?;
            *write(&self.weights) = Some(Arc::new(updated));
            lock(&self.pending).extend(report.accepted_ids.iter().cloned());
        }
        log::info!("ingested {} postings, rejected {}", report.accepted, report.rejected.len());
        Ok(report)
    }

    fn compute_weights(&self, store: &PostingStore) -> Result<SkillWeights> {
        let normalized: Vec<_> = store.iter().map(|p| self.normalize(p)).collect();
        Ok(SkillWeights::compute(&normalized)?)
    }

    /// Recomputes the weights table from the whole store and saves it.
    pub fn rebuild_weights(&self) -> Result<Arc<SkillWeights>> {
        let _job = lock(&self.job);
        let weights = Arc::new(self.compute_weights(&read(&self.store))?);
        weights.save(&self.config.paths.weights)?;
        *write(&self.weights) = Some(weights.clone());
        Ok(weights)
    }

    /// The loaded table, or one computed from the store if none was saved.
    fn weights_for(&self, store: &PostingStore) -> Result<Arc<SkillWeights>> {
        if let Some(w) = read(&self.weights).clone() {
            return Ok(w);
        }
        let computed = Arc::new(self.compute_weights(store)?);
        *write(&self.weights) = Some(computed.clone());
        Ok(computed)
    }

    fn scorer<'a>(&'a self, weights: &'a SkillWeights) -> Scorer<'a> {
        Scorer { lexicon: &self.lexicon, provider: self.provider.as_ref(), cache: &self.cache, weights }
    }

    /// Logical run timestamp: midnight UTC of the newest publication date,
    /// so repeated runs over the same store write identical logs.
    pub fn default_as_of(store: &PostingStore) -> DateTime<Utc> {
        let newest = store.iter().map(|p| p.published_at).max().unwrap_or(NaiveDate::MIN);
        newest.and_time(NaiveTime::MIN).and_utc()
    }

    pub fn dedup(&self, selection: Selection, as_of: Option<DateTime<Utc>>) -> Result<DedupSummary> {
        let _job = lock(&self.job);
        let store = read(&self.store);
        let ids: Vec<String> = match &selection {
            Selection::All => store.iter().map(|p| p.id.clone()).collect(),
            Selection::Since(date) => store.iter().filter(|p| p.published_at >= *date).map(|p| p.id.clone()).collect(),
            Selection::Ids(ids) => ids.clone(),
        };
        if ids.is_empty() {
            return Ok(DedupSummary::default());
        }
        let weights = self.weights_for(&store)?;
        let decided_at = as_of.unwrap_or_else(|| Self::default_as_of(&store));
        let outcome = run_dedup(&ids, &store, &self.config.thresholds, &self.scorer(&weights), decided_at)?;
        let summary = DedupSummary {
            postings: ids.len(),
            comparisons: outcome.comparisons,
            duplicates: outcome.duplicates,
            unscored: outcome.unscored,
        };
        {
            let mut log = write(&self.log);
            log.merge(outcome.decisions);
            log.save()?;
        }
        self.persist_cache()?;
        let mut pending = lock(&self.pending);
        for id in &ids {
            pending.remove(id);
        }
        log::info!(
            "dedup: {} postings, {} comparisons, {} duplicates, {} unscored",
            summary.postings,
            summary.comparisons,
            summary.duplicates,
            summary.unscored
        );
        Ok(summary)
    }

    /// Dedups everything ingested since the last run.
    pub fn dedup_pending(&self) -> Result<DedupSummary> {
        let ids: Vec<String> = lock(&self.pending).iter().cloned().collect();
        self.dedup(Selection::Ids(ids), None)
    }

    pub fn pending(&self) -> usize {
        lock(&self.pending).len()
    }

    pub fn persist_cache(&self) -> Result<()> {
        if self.cache.is_dirty() {
            self.cache.save(&self.config.paths.embedding_cache)?;
        }
        Ok(())
    }

    /// Full breakdown with `a` as source.
    pub fn score(&self, a: &str, b: &str) -> Result<ScoreBreakdown> {
        let store = read(&self.store);
        let get = |id: &str| store.get(id).ok_or_else(|| ServiceError::NotFound(format!("posting `{id}`")));
        let (pa, pb) = (get(a)?, get(b)?);
        let weights = self.weights_for(&store)?;
        let breakdown = self.scorer(&weights).score(&self.normalize(pa), &self.normalize(pb))?;
        Ok(breakdown)
    }

    /// Scores every labeled pair directly, smaller id as source.
    pub fn breakdowns(&self, labeled: &[LabeledPair]) -> Result<Breakdowns> {
        let store = read(&self.store);
        let weights = self.weights_for(&store)?;
        let scorer = self.scorer(&weights);
        let mut normalized: HashMap<&str, NormalizedPosting> = HashMap::new();
        let mut out = Breakdowns::new();
        for pair in labeled {
            let key = pair_key(&pair.id_a, &pair.id_b);
            for id in [&key.0, &key.1] {
                if !normalized.contains_key(id.as_str()) {
                    let posting =
                        store.get(id).ok_or_else(|| ServiceError::NotFound(format!("posting `{id}`")))?;
                    normalized.insert(posting.id.as_str(), self.normalize(posting));
                }
            }
            let breakdown = scorer.score(&normalized[key.0.as_str()], &normalized[key.1.as_str()])?;
            out.insert(key, breakdown);
        }
        Ok(out)
    }

    pub fn store_contains(&self, id: &str) -> bool {
        read(&self.store).contains(id)
    }

    pub fn load_labeled(&self, path: &std::path::Path) -> Result<Vec<LabeledPair>> {
        Ok(jobdup_core::store::load_labeled_pairs(path, Some(&read(&self.store)))?)
    }

    /// Decisions involving `id`; only duplicate verdicts unless `all`.
    pub fn decisions_for(&self, id: &str, all: bool) -> Result<Vec<MatchDecision>> {
        if !self.store_contains(id) {
            return Err(ServiceError::NotFound(format!("posting `{id}`")));
        }
        Ok(read(&self.log).for_posting(id).filter(|d| all || d.is_duplicate).cloned().collect())
    }

    pub fn review(&self, x: &str, y: &str, verdict: Verdict, reviewer: &str) -> Result<MatchDecision> {
        let (a, b) = pair_key(x, y);
        let mut log = write(&self.log);
        let decision = log.get(&a, &b).ok_or_else(|| ServiceError::NotFound(format!("no decision for ({a}, {b})")))?;
        if !decision.is_duplicate {
            return Err(ServiceError::Conflict(format!("({a}, {b}) was not flagged as duplicate")));
        }
        let feedback = ReviewFeedback {
            id_a: a.clone(),
            id_b: b.clone(),
            verdict,
            reviewer: reviewer.to_owned(),
            submitted_at: Utc::now(),
        };
        let path = &self.config.paths.reviews;
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| ServiceError::io(path, e))?;
        let line = serde_json::to_string(&feedback).expect("feedback serializes") + "\n";
        file.write_all(line.as_bytes()).map_err(|e| ServiceError::io(path, e))?;

        let updated = log.set_review(&a, &b, verdict.into()).cloned().expect("decision exists");
        log.save()?;
        Ok(updated)
    }

    /// Flagged pairs ordered by `(id_a, id_b)`, starting after `after`.
    pub fn queue(&self, status: QueueStatus, limit: usize, after: Option<(String, String)>) -> QueuePage {
        let log = read(&self.log);
        let store = read(&self.store);
        let matching: Vec<&MatchDecision> = log
            .iter()
            .filter(|d| d.is_duplicate && d.status == DecisionStatus::Scored && status.admits(d.review))
            .collect();
        let total = matching.len();
        let start = match &after {
            Some(cursor) => matching.partition_point(|d| (&d.id_a, &d.id_b) <= (&cursor.0, &cursor.1)),
            None => 0,
        };
        let page: Vec<&MatchDecision> = matching[start..].iter().take(limit).copied().collect();
        let view = |id: &str| store.get(id).map(|p| PostingView::new(p, self.normalize(p)));
        let items: Vec<QueueItem> = page
            .iter()
            .filter_map(|d| {
                Some(QueueItem {
                    id_a: d.id_a.clone(),
                    id_b: d.id_b.clone(),
                    review: d.review,
                    breakdown: d.breakdown.clone()?,
                    posting_a: view(&d.id_a)?,
                    posting_b: view(&d.id_b)?,
                })
            })
            .collect();
        let next = (start + page.len() < total)
            .then(|| page.last())
            .flatten()
            .map(|d| PageCursor { after_a: d.id_a.clone(), after_b: d.id_b.clone() });
        QueuePage { total, items, next }
    }

    pub fn stats(&self) -> Stats {
        let log = read(&self.log);
        let postings = read(&self.store).len();
        let groups = duplicate_groups(log.iter());
        let mut stats = Stats {
            postings,
            comparisons: log.len(),
            groups: groups.group_count,
            mean_group_size: groups.mean_group_size,
            grouped_postings: groups.grouped_postings,
            unique_postings: groups.unique_postings(postings),
            ..Stats::default()
        };
        for d in log.iter() {
            if d.status == DecisionStatus::Unscored {
                stats.unscored += 1;
            }
            if d.is_duplicate {
                stats.duplicates += 1;
                match d.review {
                    ReviewStatus::Unreviewed => stats.unreviewed += 1,
                    ReviewStatus::Confirmed => stats.confirmed += 1,
                    ReviewStatus::Rejected => stats.rejected += 1,
                }
            }
        }
        stats
    }

    pub fn posting_count(&self) -> usize {
        read(&self.store).len()
    }
}
