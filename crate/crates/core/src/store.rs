//! Posting store, skill lexicon and labeled pair sets.
//!
//! Postings live in an append-only JSONL file. The in-memory index (by id and
//! by publish date) is rebuilt from that file on open, so the file is the only
//! durable state.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::preprocess::normalize_text;

/// Default candidate window, in days, on both sides of a posting's date.
pub const DEFAULT_WINDOW_DAYS: u32 = 42;

/// Lexicon entries longer than this (in chars, after normalization) are dropped.
pub const MAX_TERM_CHARS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobPosting {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub description: String,
    pub published_at: NaiveDate,
    pub source: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl JobPosting {
    /// Validates a raw JSON record against the posting schema.
    ///
    /// The error string is the rejection reason reported to the caller.
    pub fn from_value(value: &Value) -> std::result::Result<Self, String> {
        let obj = value.as_object().ok_or("record is not a JSON object")?;
        let string_field = |name: &str| -> std::result::Result<Option<String>, String> {
            match obj.get(name) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(format!("field `{name}` is not a string")),
            }
        };

        let id = string_field("id")?.ok_or("missing id")?;
        if id.trim().is_empty() {
            return Err("empty id".into());
        }
        let description = string_field("description")?.unwrap_or_default();
        if description.trim().is_empty() {
            return Err("empty description".into());
        }
        let title = string_field("title")?.unwrap_or_default();
        let published_raw = string_field("published_at")?.ok_or("missing published_at")?;
        let published_at = published_raw
            .parse::<NaiveDate>()
            .map_err(|e| format!("invalid published_at `{published_raw}`: {e}"))?;
        let source = string_field("source")?.ok_or("missing source")?;

        let mut extra = BTreeMap::new();
        match obj.get("extra") {
            None | Some(Value::Null) => {}
            Some(Value::Object(map)) => {
                for (k, v) in map {
                    let v = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    extra.insert(k.clone(), v);
                }
            }
            Some(_) => return Err("field `extra` is not an object".into()),
        }

        Ok(JobPosting { id, title, description, published_at, source, extra })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the input stream (or index in a JSON array).
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub accepted_ids: Vec<String>,
    pub rejected: Vec<Rejection>,
}

/// Append-only posting store with an id index and a date index.
#[derive(Debug, Default)]
pub struct PostingStore {
    path: Option<PathBuf>,
    postings: BTreeMap<String, JobPosting>,
    by_date: BTreeSet<(NaiveDate, String)>,
}

impl PostingStore {
    /// A store that is never persisted. Used by tests and one-shot tools.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates on first ingest) the JSONL store at `path` and
    /// rebuilds the index.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut store = PostingStore { path: Some(path.clone()), ..Self::default() };
        if !path.exists() {
            return Ok(store);
        }
        let reader = BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let posting: JobPosting = serde_json::from_str(&line).map_err(|e| {
                Error::Invalid(format!("{}:{}: corrupt store record: {e}", path.display(), n + 1))
            })?;
            store.insert_indexed(posting);
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.postings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.postings.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&JobPosting> {
        self.postings.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.postings.contains_key(id)
    }

    /// All postings ordered by id.
    pub fn iter(&self) -> impl Iterator<Item = &JobPosting> {
        self.postings.values()
    }

    /// Ingests line-delimited JSON. Bad records are rejected individually;
    /// only a read failure on the stream aborts the run.
    pub fn ingest<R: BufRead>(&mut self, reader: R) -> Result<IngestReport> {
        let mut records = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Value>(&line).map_err(|e| format!("malformed json: {e}"));
            records.push((n + 1, parsed));
        }
        self.ingest_records(records)
    }

    /// Ingests already-parsed JSON records (e.g. the elements of a JSON array).
    pub fn ingest_values(&mut self, values: impl IntoIterator<Item = Value>) -> Result<IngestReport> {
        let records = values.into_iter().enumerate().map(|(i, v)| (i + 1, Ok(v))).collect();
        self.ingest_records(records)
    }

    fn ingest_records(
        &mut self,
        records: Vec<(usize, std::result::Result<Value, String>)>,
    ) -> Result<IngestReport> {
        let mut report = IngestReport::default();
        let mut accepted = Vec::new();
        for (line, parsed) in records {
            let value = match parsed {
                Ok(v) => v,
                Err(reason) => {
                    report.rejected.push(Rejection { line, id: None, reason });
                    continue;
                }
            };
            let id_hint = value.get("id").and_then(Value::as_str).map(str::to_owned);
            match JobPosting::from_value(&value) {
                Err(reason) => report.rejected.push(Rejection { line, id: id_hint, reason }),
                Ok(p) if self.postings.contains_key(&p.id) => report.rejected.push(Rejection {
                    line,
                    id: Some(p.id),
                    reason: "duplicate id".into(),
                }),
                Ok(p) => {
                    report.accepted_ids.push(p.id.clone());
                    self.insert_indexed(p.clone());
                    accepted.push(p);
                }
            }
        }
        report.accepted = accepted.len();
        if let Err(e) = self.append(&accepted) {
            // keep the index consistent with the file
            for p in &accepted {
                self.postings.remove(&p.id);
                self.by_date.remove(&(p.published_at, p.id.clone()));
            }
            return Err(e);
        }
        Ok(report)
    }

    fn append(&self, postings: &[JobPosting]) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if postings.is_empty() {
            return Ok(());
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for p in postings {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    fn insert_indexed(&mut self, posting: JobPosting) {
        self.by_date.insert((posting.published_at, posting.id.clone()));
        self.postings.insert(posting.id.clone(), posting);
    }

    /// Every other posting published within `window_days` of `id`'s date
    /// (both directions, inclusive), ordered by id.
    pub fn candidates(&self, id: &str, window_days: u32) -> Result<Vec<&JobPosting>> {
        let posting = self
            .postings
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("posting `{id}`")))?;
        let window = Duration::days(i64::from(window_days));
        let lo = posting.published_at.checked_sub_signed(window).unwrap_or(NaiveDate::MIN);
        let hi = posting.published_at.checked_add_signed(window).unwrap_or(NaiveDate::MAX);
        let mut out: Vec<&JobPosting> = self
            .by_date
            .range((lo, String::new())..)
            .take_while(|(date, _)| *date <= hi)
            .filter(|(_, other)| other != id)
            .map(|(_, other)| &self.postings[other])
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }
}

/// Skill list plus blacklist. Only the effective set (skills minus blacklist)
/// is visible to matching.
#[derive(Clone, Debug, Default)]
pub struct SkillLexicon {
    skills: BTreeSet<String>,
    blacklist: BTreeSet<String>,
    effective: HashSet<String>,
    max_words: usize,
}

impl SkillLexicon {
    pub fn new<S, B>(skills: S, blacklist: B) -> Result<Self>
    where
        S: IntoIterator,
        S::Item: AsRef<str>,
        B: IntoIterator,
        B::Item: AsRef<str>,
    {
        let skills = normalize_terms(skills);
        let blacklist = normalize_terms(blacklist);
        let effective: HashSet<String> = skills.difference(&blacklist).cloned().collect();
        if effective.is_empty() {
            return Err(Error::Config("effective skill lexicon is empty".into()));
        }
        let max_words = effective.iter().map(|t| t.split(' ').count()).max().unwrap_or(0);
        Ok(SkillLexicon { skills, blacklist, effective, max_words })
    }

    /// Loads newline-delimited term lists; `#` lines are comments. A missing
    /// blacklist is treated as empty.
    pub fn load(skills_path: impl AsRef<Path>, blacklist_path: Option<&Path>) -> Result<Self> {
        let skills = read_term_file(skills_path.as_ref())?;
        let blacklist = match blacklist_path {
            Some(p) if p.exists() => read_term_file(p)?,
            _ => Vec::new(),
        };
        Self::new(skills, blacklist)
    }

    pub fn skills(&self) -> &BTreeSet<String> {
        &self.skills
    }

    pub fn blacklist(&self) -> &BTreeSet<String> {
        &self.blacklist
    }

    /// Effective terms in sorted order.
    pub fn effective_terms(&self) -> Vec<&str> {
        let mut terms: Vec<&str> = self.effective.iter().map(String::as_str).collect();
        terms.sort_unstable();
        terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.effective.contains(term)
    }

    /// Largest number of space-separated words in any effective term.
    pub fn max_words(&self) -> usize {
        self.max_words
    }
}

fn normalize_terms<I>(terms: I) -> BTreeSet<String>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut out = BTreeSet::new();
    for raw in terms {
        let term = normalize_text(raw.as_ref());
        if term.is_empty() {
            continue;
        }
        if term.chars().count() > MAX_TERM_CHARS {
            log::warn!("dropping lexicon term longer than {MAX_TERM_CHARS} chars: {term:.40}...");
            continue;
        }
        out.insert(term);
    }
    out
}

fn read_term_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Duplicate,
    NonDuplicate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub id_a: String,
    pub id_b: String,
    pub label: Label,
}

impl LabeledPair {
    pub fn new(id_a: impl Into<String>, id_b: impl Into<String>, label: Label) -> Self {
        LabeledPair { id_a: id_a.into(), id_b: id_b.into(), label }
    }
}

/// Reads a labeled pairs JSONL file. When a store is given, both ids of every
/// pair must resolve in it.
pub fn load_labeled_pairs(path: impl AsRef<Path>, store: Option<&PostingStore>) -> Result<Vec<LabeledPair>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), n + 1);
        let pair: LabeledPair =
            serde_json::from_str(&line).map_err(|e| Error::Invalid(format!("{}: {e}", at())))?;
        if pair.id_a == pair.id_b {
            return Err(Error::Invalid(format!("{}: pair references `{}` twice", at(), pair.id_a)));
        }
        if let Some(store) = store {
            for id in [&pair.id_a, &pair.id_b] {
                if !store.contains(id) {
                    return Err(Error::NotFound(format!("{}: posting `{id}`", at())));
                }
            }
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, date: &str) -> String {
        format!(r#"{{"id":"{id}","title":"t","description":"d {id}","published_at":"{date}","source":"board"}}"#)
    }

    fn store_with(dates: &[(&str, &str)]) -> PostingStore {
        let mut store = PostingStore::in_memory();
        let input: String = dates.iter().map(|(id, d)| line(id, d) + "\n").collect();
        store.ingest(input.as_bytes()).unwrap();
        store
    }

    #[test]
    fn ingest_three_valid_lines() {
        let store_input = [line("a", "2024-01-01"), line("b", "2024-01-02"), line("c", "2024-01-03")].join("\n");
        let mut store = PostingStore::in_memory();
        let report = store.ingest(store_input.as_bytes()).unwrap();
        assert_eq!(report.accepted, 3);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn missing_description_is_rejected() {
        let input = r#"{"id":"x","title":"t","published_at":"2024-01-01","source":"s"}"#;
        let mut store = PostingStore::in_memory();
        let report = store.ingest(input.as_bytes()).unwrap();
        assert_eq!(report.accepted, 0);
        assert_eq!(report.rejected[0].reason, "empty description");
        assert_eq!(report.rejected[0].id.as_deref(), Some("x"));
    }

    #[test]
    fn duplicate_id_rejected_second_time() {
        let input = [line("a", "2024-01-01"), line("a", "2024-01-05")].join("\n");
        let mut store = PostingStore::in_memory();
        let report = store.ingest(input.as_bytes()).unwrap();
        assert_eq!(report.accepted, 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].line, 2);
        assert_eq!(report.rejected[0].reason, "duplicate id");
    }

    #[test]
    fn malformed_lines_do_not_abort() {
        let input = format!("{{not json\n{}\n{}", line("a", "2024-01-01"), r#"{"id":"b","description":"x","published_at":"2024-13-01","source":"s"}"#);
        let mut store = PostingStore::in_memory();
        let report = store.ingest(input.as_bytes()).unwrap();
        assert_eq!(report.accepted, 1);
        assert!(report.rejected[0].reason.starts_with("malformed json"));
        assert!(report.rejected[1].reason.starts_with("invalid published_at"));
    }

    #[test]
    fn reingesting_same_file_adds_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("postings.jsonl");
        let input = [line("a", "2024-01-01"), line("b", "2024-01-02")].join("\n");
        let mut store = PostingStore::open(&path).unwrap();
        assert_eq!(store.ingest(input.as_bytes()).unwrap().accepted, 2);
        assert_eq!(store.ingest(input.as_bytes()).unwrap().accepted, 0);

        let reopened = PostingStore::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        let mut again = reopened;
        assert_eq!(again.ingest(input.as_bytes()).unwrap().accepted, 0);
    }

    #[test]
    fn candidates_window_by_hand() {
        // day 100 = 2024-04-09 counting 2024-01-01 as day 0
        let base = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let day = |n: i64| (base + Duration::days(n)).to_string();
        let store = store_with(&[
            ("p", &day(100)),
            ("d70", &day(70)),
            ("d140", &day(140)),
            ("d30", &day(30)),
        ]);
        let ids: Vec<_> = store.candidates("p", 42).unwrap().iter().map(|p| p.id.clone()).collect();
        assert_eq!(ids, vec!["d140", "d70"]);
    }

    #[test]
    fn candidates_zero_window() {
        let store = store_with(&[("p", "2024-03-01"), ("q", "2024-03-02")]);
        assert!(store.candidates("p", 0).unwrap().is_empty());

        let store = store_with(&[("p", "2024-03-01"), ("q", "2024-03-01")]);
        let ids: Vec<_> = store.candidates("p", 0).unwrap().iter().map(|p| p.id.clone()).collect();
        assert_eq!(ids, vec!["q"]);
    }

    #[test]
    fn candidates_unknown_id() {
        let store = store_with(&[("p", "2024-03-01")]);
        assert!(matches!(store.candidates("nope", 3), Err(Error::NotFound(_))));
    }

    #[test]
    fn lexicon_normalization() {
        let lex = SkillLexicon::new(["Java", "Spring Boot"], Vec::<String>::new()).unwrap();
        assert_eq!(lex.effective_terms(), vec!["java", "spring boot"]);

        let lex = SkillLexicon::new(["java", "english"], ["english"]).unwrap();
        assert_eq!(lex.effective_terms(), vec!["java"]);

        let lex = SkillLexicon::new(["java", "java"], Vec::<String>::new()).unwrap();
        assert_eq!(lex.effective_terms(), vec!["java"]);
    }

    #[test]
    fn lexicon_empty_effective_is_config_error() {
        let err = SkillLexicon::new(["english"], ["English"]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn lexicon_drops_overlong_terms() {
        let long = "x".repeat(65);
        let lex = SkillLexicon::new([long.as_str(), "rust"], Vec::<String>::new()).unwrap();
        assert_eq!(lex.effective_terms(), vec!["rust"]);
    }

    #[test]
    fn lexicon_files_with_comments_and_missing_blacklist() {
        let dir = tempfile::tempdir().unwrap();
        let skills = dir.path().join("skills.txt");
        std::fs::write(&skills, "# header\nJava\n\n  SQL  \n").unwrap();
        let lex = SkillLexicon::load(&skills, Some(&dir.path().join("absent.txt"))).unwrap();
        assert_eq!(lex.effective_terms(), vec!["java", "sql"]);
    }

    #[test]
    fn labeled_pairs_validated_against_store() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        std::fs::write(&path, "{\"id_a\":\"a\",\"id_b\":\"b\",\"label\":\"duplicate\"}\n").unwrap();
        let store = store_with(&[("a", "2024-01-01"), ("b", "2024-01-01")]);
        let pairs = load_labeled_pairs(&path, Some(&store)).unwrap();
        assert_eq!(pairs, vec![LabeledPair::new("a", "b", Label::Duplicate)]);

        std::fs::write(&path, "{\"id_a\":\"a\",\"id_b\":\"zz\",\"label\":\"non_duplicate\"}\n").unwrap();
        assert!(matches!(load_labeled_pairs(&path, Some(&store)), Err(Error::NotFound(_))));

        std::fs::write(&path, "{\"id_a\":\"a\",\"id_b\":\"a\",\"label\":\"duplicate\"}\n").unwrap();
        assert!(load_labeled_pairs(&path, None).is_err());
    }
}
