use std::time::Duration;

use chrono::{TimeZone, Utc};
use jobdup_core::embedding::{EmbeddingCache, EmbeddingProvider, LocalProvider, RemoteProvider};
use jobdup_core::pipeline::{duplicate_groups, run_dedup, DecisionLog, DecisionStatus, Scorer, ThresholdConfig};
use jobdup_core::preprocess::build_normalized;
use jobdup_core::store::{PostingStore, SkillLexicon};
use jobdup_core::weights::SkillWeights;

const DESC_JAVA: &str = "Java developer with Spring Boot and SQL for our banking client in Frankfurt.";
const DESC_SAP: &str = "SAP FICO consultant for an S/4 HANA rollout, German required.";

fn line(id: &str, desc: &str, date: &str) -> String {
    format!(r#"{{"id":"{id}","title":"Job {id}","description":"{desc}","published_at":"{date}","source":"s"}}"#) + "\n"
}

fn corpus() -> String {
    [
        line("j1", DESC_JAVA, "2024-05-01"),
        line("j2", DESC_JAVA, "2024-05-10"),
        line("s1", DESC_SAP, "2024-05-03"),
        line("late", DESC_JAVA, "2024-09-01"),
    ]
    .concat()
}

fn lexicon() -> SkillLexicon {
    SkillLexicon::new(["java", "spring boot", "sql", "sap fico", "s/4 hana", "german"], ["german"]).unwrap()
}

#[test]
fn store_reopen_dedup_and_groups() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("postings.jsonl");
    {
        let mut store = PostingStore::open(&store_path).unwrap();
        assert_eq!(store.ingest(corpus().as_bytes()).unwrap().accepted, 4);
    }
    let store = PostingStore::open(&store_path).unwrap();
    assert_eq!(store.len(), 4);

    let lexicon = lexicon();
    let provider = LocalProvider::new(64, 3).unwrap();
    let cache = EmbeddingCache::for_provider(&provider);
    let normalized: Vec<_> = store.iter().map(|p| build_normalized(p, &lexicon)).collect();
    let weights = SkillWeights::compute(&normalized).unwrap();
    let scorer = Scorer { lexicon: &lexicon, provider: &provider, cache: &cache, weights: &weights };
    let at = Utc.with_ymd_and_hms(2024, 9, 1, 0, 0, 0).unwrap();
    let ids: Vec<String> = store.iter().map(|p| p.id.clone()).collect();
    let outcome = run_dedup(&ids, &store, &ThresholdConfig::production(), &scorer, at).unwrap();

    // late is outside every window
    let keys: Vec<_> = outcome.decisions.iter().map(|d| (d.id_a.as_str(), d.id_b.as_str())).collect();
    assert_eq!(keys, [("j1", "j2"), ("j1", "s1"), ("j2", "s1")]);
    assert_eq!(outcome.duplicates, 1);
    let groups = duplicate_groups(&outcome.decisions);
    assert_eq!(groups.group_count, 1);
    assert_eq!(groups.unique_postings(store.len()), 3);

    let cache_path = dir.path().join("cache.bin");
    cache.save(&cache_path).unwrap();
    let reloaded = EmbeddingCache::load(&cache_path, &provider.fingerprint()).unwrap();
    assert_eq!(reloaded.len(), cache.len());

    let log_path = dir.path().join("decisions.jsonl");
    let mut log = DecisionLog::open(&log_path).unwrap();
    log.merge(outcome.decisions);
    log.save().unwrap();
    let reopened = DecisionLog::open(&log_path).unwrap();
    assert_eq!(reopened.to_jsonl(), log.to_jsonl());
    assert!(reopened.get("j2", "j1").unwrap().is_duplicate);
}

#[test]
fn provider_outage_leaves_pairs_unscored() {
    let mut store = PostingStore::in_memory();
    store.ingest(corpus().as_bytes()).unwrap();
    let lexicon = lexicon();
    // nothing listens on port 9 locally
    let provider = RemoteProvider::new("remote-test", "http://127.0.0.1:9/embed", 16, Duration::from_millis(300));
    let cache = EmbeddingCache::for_provider(&provider);
    let normalized: Vec<_> = store.iter().map(|p| build_normalized(p, &lexicon)).collect();
    let weights = SkillWeights::compute(&normalized).unwrap();
    let scorer = Scorer { lexicon: &lexicon, provider: &provider, cache: &cache, weights: &weights };
    let at = Utc.with_ymd_and_hms(2024, 9, 1, 0, 0, 0).unwrap();
    let outcome = run_dedup(&["j1".to_string()], &store, &ThresholdConfig::validation(), &scorer, at).unwrap();
    assert_eq!(outcome.comparisons, 2);
    assert_eq!(outcome.unscored, 2);
    for d in &outcome.decisions {
        assert_eq!(d.status, DecisionStatus::Unscored);
        assert!(!d.is_duplicate);
        assert!(d.error.as_deref().unwrap().contains("scoring unavailable"));
    }
}
