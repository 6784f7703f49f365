#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::{json, Value};

pub const SKILLS: &str = "# test lexicon\njava\nspring boot\nsql\nembedded c\nautosar\nsimulink\npython\npytorch\nairflow\nteamwork\n";

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self::with_thresholds("")
    }

    /// `extra` is appended verbatim to the config file.
    pub fn with_thresholds(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("data")).unwrap();
        std::fs::write(dir.path().join("data/skills.txt"), SKILLS).unwrap();
        std::fs::write(dir.path().join("data/blacklist.txt"), "teamwork\n").unwrap();
        let config = format!(
            r#"listen = "127.0.0.1:0"

[paths]
postings = "data/postings.jsonl"
skills = "data/skills.txt"
blacklist = "data/blacklist.txt"
weights = "data/weights.json"
decisions = "data/decisions.jsonl"
reviews = "data/reviews.jsonl"
embedding_cache = "data/embeddings.bin"

[provider]
kind = "local"
dim = 128
seed = 1
{extra}"#
        );
        std::fs::write(dir.path().join("jobdup.toml"), config).unwrap();
        Workspace { dir }
    }

    pub fn config_path(&self) -> PathBuf {
        self.dir.path().join("jobdup.toml")
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn write(&self, rel: &str, contents: &str) -> PathBuf {
        let p = self.path(rel);
        std::fs::write(&p, contents).unwrap();
        p
    }

    pub fn app(&self) -> jobdup::App {
        jobdup::App::open(jobdup::ServiceConfig::load(self.config_path()).unwrap()).unwrap()
    }
}

pub fn posting(id: &str, title: &str, description: &str, date: &str) -> Value {
    json!({"id": id, "title": title, "description": description, "published_at": date, "source": "board"})
}

const JAVA: &str = "Senior Java developer with Spring Boot and SQL for a remote project in Munich, teamwork required.";
const EMBEDDED: &str = "Embedded C engineer for AUTOSAR and Simulink in Stuttgart, start as soon as possible.";
const DATA: &str = "Python data scientist with PyTorch and Airflow for a remote project in Munich.";

/// Two duplicate pairs (a/b and c/d) far apart in time, plus `e`, which is
/// in the window of a and b but shares none of their skills.
pub fn two_group_postings() -> Vec<Value> {
    vec![
        posting("a", "Java Developer", JAVA, "2024-03-01"),
        posting("b", "Java Developer (remote)", JAVA, "2024-03-05"),
        posting("c", "Embedded Engineer", EMBEDDED, "2024-06-01"),
        posting("d", "Embedded Engineer", EMBEDDED, "2024-06-03"),
        posting("e", "Data Scientist", DATA, "2024-03-02"),
    ]
}

pub fn jsonl(values: &[Value]) -> String {
    values.iter().map(|v| v.to_string() + "\n").collect()
}
