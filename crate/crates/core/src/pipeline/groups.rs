//! Transitive duplicate groups over the flagged pairs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MatchDecision;

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// Components with at least two postings, each sorted, ordered by their
    /// smallest id.
    pub groups: Vec<BTreeSet<String>>,
    /// Ids seen in the decisions that belong to no group.
    pub singletons: BTreeSet<String>,
    pub group_count: usize,
    pub mean_group_size: f64,
    /// Postings inside some group.
    pub grouped_postings: usize,
}

impl GroupSummary {
    /// Distinct jobs among `total_postings` once each group counts as one.
    pub fn unique_postings(&self, total_postings: usize) -> usize {
        total_postings - self.grouped_postings + self.group_count
    }
}

/// Connected components of the graph whose edges are the duplicate verdicts.
pub fn duplicate_groups<'a>(decisions: impl IntoIterator<Item = &'a MatchDecision>) -> GroupSummary {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut edges = Vec::new();
    for d in decisions {
        let next = index.len();
        let a = *index.entry(d.id_a.as_str()).or_insert(next);
        let next = index.len();
        let b = *index.entry(d.id_b.as_str()).or_insert(next);
        if d.is_duplicate {
            edges.push((a, b));
        }
    }
    let mut dsu = DisjointSet::new(index.len());
    for (a, b) in edges {
        dsu.union(a, b);
    }
    let mut components: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (id, i) in &index {
        components.entry(dsu.find(*i)).or_default().insert((*id).to_owned());
    }
    let mut summary = GroupSummary::default();
    for members in components.into_values() {
        if members.len() >= 2 {
            summary.grouped_postings += members.len();
            summary.groups.push(members);
        } else {
            summary.singletons.extend(members);
        }
    }
    summary.groups.sort();
    summary.group_count = summary.groups.len();
    summary.mean_group_size = if summary.group_count == 0 {
        0.0
    } else {
        summary.grouped_postings as f64 / summary.group_count as f64
    };
    summary
}
