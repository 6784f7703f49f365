mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{jsonl, posting, two_group_postings, Workspace};

async fn call(router: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn get(router: &Router, uri: &str) -> (StatusCode, Value) {
    call(router, "GET", uri, Body::empty()).await
}

async fn post(router: &Router, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    call(router, "POST", uri, body).await
}

fn router_for(ws: &Workspace) -> Router {
    jobdup::http::router(Arc::new(ws.app()))
}

/// Ingests the two-group corpus and dedups it in the same request.
async fn seeded(ws: &Workspace) -> Router {
    let router = router_for(ws);
    let body = serde_json::to_string(&two_group_postings()).unwrap();
    let (status, report) = post(&router, "/postings?dedup=true", body).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    assert_eq!(report["ingest"]["accepted"], 5);
    router
}

#[tokio::test]
async fn ingest_json_array_and_jsonl() {
    let ws = Workspace::new();
    let router = router_for(&ws);
    let array = json!([posting("p1", "t", "java developer", "2024-01-01"), {"id": "p2", "description": ""}]);
    let (status, report) = post(&router, "/postings", array.to_string()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["ingest"]["accepted"], 1);
    assert_eq!(report["ingest"]["accepted_ids"], json!(["p1"]));
    assert_eq!(report["ingest"]["rejected"][0]["id"], "p2");
    assert_eq!(report["dedup"], Value::Null);

    let lines = jsonl(&[posting("p3", "t", "sql", "2024-01-02"), posting("p1", "t", "dup id", "2024-01-02")]);
    let (status, report) = post(&router, "/postings", lines + "{not json\n").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["ingest"]["accepted"], 1);
    let reasons: Vec<&str> =
        report["ingest"]["rejected"].as_array().unwrap().iter().map(|r| r["reason"].as_str().unwrap()).collect();
    assert_eq!(reasons[0], "duplicate id");
    assert!(reasons[1].starts_with("malformed json"));

    let (_, stats) = get(&router, "/stats").await;
    assert_eq!(stats["postings"], 2);
    assert!(ws.path("data/weights.json").exists());
}

#[tokio::test]
async fn malformed_array_body_is_bad_request() {
    let ws = Workspace::new();
    let (status, body) = post(&router_for(&ws), "/postings", "[{\"id\": ").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("JSON array"));
}

#[tokio::test]
async fn duplicates_for_posting() {
    let ws = Workspace::new();
    let router = seeded(&ws).await;
    let (status, body) = get(&router, "/postings/a/duplicates").await;
    assert_eq!(status, StatusCode::OK);
    let decisions = body["decisions"].as_array().unwrap();
    assert_eq!(decisions.len(), 1);
    assert_eq!((decisions[0]["id_a"].as_str(), decisions[0]["id_b"].as_str()), (Some("a"), Some("b")));
    assert_eq!(decisions[0]["breakdown"]["ts"], 1.0);
    assert!(!decisions[0]["breakdown"]["blocks"].as_array().unwrap().is_empty());

    let (_, all) = get(&router, "/postings/a/duplicates?all=true").await;
    assert_eq!(all["decisions"].as_array().unwrap().len(), 2);

    let (status, body) = get(&router, "/postings/nope/duplicates").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("nope"));
}

#[tokio::test]
async fn queue_items_carry_texts_and_valid_blocks() {
    let ws = Workspace::new();
    let router = seeded(&ws).await;
    let (status, page) = get(&router, "/review/queue?status=unreviewed").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(page["total"], 2);
    assert_eq!(page["next"], Value::Null);
    let items = page["items"].as_array().unwrap();
    let keys: Vec<(&str, &str)> =
        items.iter().map(|i| (i["id_a"].as_str().unwrap(), i["id_b"].as_str().unwrap())).collect();
    assert_eq!(keys, [("a", "b"), ("c", "d")]);
    for item in items {
        assert_eq!(item["review"], "unreviewed");
        assert!(item["posting_a"]["description"].as_str().unwrap().contains("Spring Boot") || item["id_a"] == "c");
        let a_len = item["posting_a"]["norm_description"].as_str().unwrap().chars().count();
        let b_len = item["posting_b"]["norm_description"].as_str().unwrap().chars().count();
        let blocks = item["breakdown"]["blocks"].as_array().unwrap();
        assert!(!blocks.is_empty());
        for blk in blocks {
            let len = blk["length"].as_u64().unwrap() as usize;
            assert!(blk["a_start"].as_u64().unwrap() as usize + len <= a_len);
            assert!(blk["b_start"].as_u64().unwrap() as usize + len <= b_len);
        }
        assert_eq!(item["posting_a"]["skill_text"], item["posting_b"]["skill_text"]);
    }
    // the blacklisted term never reaches the skill text
    assert_eq!(items[0]["posting_a"]["skill_text"], "java spring boot sql");
}

#[tokio::test]
async fn queue_paginates_by_pair_key() {
    let ws = Workspace::new();
    let router = seeded(&ws).await;
    let (_, first) = get(&router, "/review/queue?limit=1").await;
    assert_eq!(first["items"].as_array().unwrap().len(), 1);
    assert_eq!(first["items"][0]["id_a"], "a");
    assert_eq!(first["next"], json!({"after_a": "a", "after_b": "b"}));
    let (_, second) = get(&router, "/review/queue?limit=1&after_a=a&after_b=b").await;
    assert_eq!(second["items"][0]["id_a"], "c");
    assert_eq!(second["next"], Value::Null);

    let (status, _) = get(&router, "/review/queue?after_a=a").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&router, "/review/queue?status=maybe").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn review_round_trip() {
    let ws = Workspace::new();
    let router = seeded(&ws).await;
    // either id order addresses the same pair
    let (status, decision) = post(&router, "/review/b/a", r#"{"verdict":"confirmed","reviewer":"kim"}"#).await;
    assert_eq!(status, StatusCode::OK, "{decision}");
    assert_eq!(decision["review"], "confirmed");

    let (_, page) = get(&router, "/review/queue").await;
    assert_eq!(page["total"], 1);
    assert_eq!(page["items"][0]["id_a"], "c");
    let (_, confirmed) = get(&router, "/review/queue?status=confirmed").await;
    assert_eq!(confirmed["items"][0]["id_a"], "a");

    // re-review overwrites the verdict
    let (status, decision) = post(&router, "/review/a/b", r#"{"verdict":"rejected","reviewer":"lee"}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(decision["review"], "rejected");

    let (_, stats) = get(&router, "/stats").await;
    assert_eq!((stats["rejected"].as_u64(), stats["unreviewed"].as_u64()), (Some(1), Some(1)));

    let feedback = std::fs::read_to_string(ws.path("data/reviews.jsonl")).unwrap();
    let lines: Vec<Value> = feedback.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!((lines[0]["verdict"].as_str(), lines[0]["reviewer"].as_str()), (Some("confirmed"), Some("kim")));
    assert_eq!((lines[1]["id_a"].as_str(), lines[1]["id_b"].as_str()), (Some("a"), Some("b")));

    // the verdict survives a restart
    let reopened = router_for(&ws);
    let (_, page) = get(&reopened, "/review/queue?status=rejected").await;
    assert_eq!(page["total"], 1);
}

#[tokio::test]
async fn review_errors() {
    let ws = Workspace::new();
    let router = seeded(&ws).await;
    let (status, body) = post(&router, "/review/a/b", r#"{"verdict":"maybe","reviewer":"kim"}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
    let (status, _) = post(&router, "/review/a/b", "not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(&router, "/review/a/zzz", r#"{"verdict":"confirmed","reviewer":"kim"}"#).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = post(&router, "/review/a/e", r#"{"verdict":"confirmed","reviewer":"kim"}"#).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert!(!ws.path("data/reviews.jsonl").exists());
}

#[tokio::test]
async fn stats_for_two_groups() {
    let ws = Workspace::new();
    let router = seeded(&ws).await;
    let (status, stats) = get(&router, "/stats").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stats["postings"], 5);
    // a-b, a-e, b-e inside one window; c-d inside another
    assert_eq!(stats["comparisons"], 4);
    assert_eq!(stats["duplicates"], 2);
    assert_eq!(stats["groups"], 2);
    assert_eq!(stats["mean_group_size"], 2.0);
    assert_eq!(stats["unique_postings"], 3);
    assert_eq!(stats["unscored"], 0);
}

#[tokio::test]
async fn config_reports_thresholds() {
    let ws = Workspace::with_thresholds(
        "\n[thresholds]\nmode = \"validation\"\nts_threshold = 0.35\ncomponent_floor = 0.0\nwindow_days = 30\n",
    );
    let (status, cfg) = get(&router_for(&ws), "/config").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cfg["mode"], "validation");
    assert_eq!(cfg["ts_threshold"], 0.35);
    assert_eq!(cfg["window_days"], 30);
    assert_eq!(cfg["floor_scope"], "ts_components");
    assert_eq!(cfg["per_score_thresholds"]["wss"], 0.2);
}

#[tokio::test]
async fn unknown_endpoint_is_json_404() {
    let ws = Workspace::new();
    let (status, body) = get(&router_for(&ws), "/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn pending_postings_dedup_later() {
    let ws = Workspace::new();
    let app = Arc::new(ws.app());
    let router = jobdup::http::router(app.clone());
    let body = jsonl(&two_group_postings());
    post(&router, "/postings", body).await;
    assert_eq!(app.pending(), 5);
    let (_, page) = get(&router, "/review/queue").await;
    assert_eq!(page["total"], 0);

    let summary = app.dedup_pending().unwrap();
    assert_eq!((summary.postings, summary.comparisons, summary.duplicates), (5, 4, 2));
    assert_eq!(app.pending(), 0);
    let (_, page) = get(&router, "/review/queue").await;
    assert_eq!(page["total"], 2);
}
