//! Character-block overlap scores (TOS over descriptions, SOS over skill texts).
//!
//! Blocks come from a recursive longest-common-substring decomposition: take
//! the longest common substring (leftmost in `a`, then leftmost in `b`), keep
//! it if it is at least `min_len` chars, then recurse on the text left of it
//! and on the text right of it in both strings. Each longest-match query runs
//! on a suffix automaton of the `b` range, so one query is linear in the range
//! sizes.

use serde::{Deserialize, Serialize};

use crate::preprocess::NormalizedPosting;

/// Blocks shorter than this do not count towards the overlap scores.
pub const MIN_BLOCK_CHARS: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchBlock {
    pub a_start: usize,
    pub b_start: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    /// Blocks of the forward pass (first argument as source).
    pub blocks: Vec<MatchBlock>,
    pub forward: f64,
    pub backward: f64,
    #[serde(rename = "final")]
    pub score: f64,
}

impl OverlapResult {
    fn zero() -> Self {
        OverlapResult { blocks: Vec::new(), forward: 0.0, backward: 0.0, score: 0.0 }
    }
}

/// Maps both texts onto a dense alphabet so automaton transitions key on u32.
fn encode(a: &str, b: &str) -> (Vec<u32>, Vec<u32>) {
    let mut alphabet = std::collections::HashMap::new();
    let mut code = |c: char| {
        let next = alphabet.len() as u32;
        *alphabet.entry(c).or_insert(next)
    };
    let a: Vec<u32> = a.chars().map(&mut code).collect();
    let b: Vec<u32> = b.chars().map(&mut code).collect();
    (a, b)
}

pub fn matching_blocks(a: &str, b: &str, min_len: usize) -> Vec<MatchBlock> {
    let (a, b) = encode(a, b);
    matching_blocks_encoded(&a, &b, min_len)
}

fn matching_blocks_encoded(a: &[u32], b: &[u32], min_len: usize) -> Vec<MatchBlock> {
    let min_len = min_len.max(1);
    let mut blocks = Vec::new();
    let mut automaton = SuffixAutomaton::default();
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        if ahi - alo < min_len || bhi - blo < min_len {
            continue;
        }
        automaton.rebuild(&b[blo..bhi]);
        let Some((i, j, len)) = automaton.longest_match(&a[alo..ahi]) else { continue };
        if len < min_len {
            continue;
        }
        let (i, j) = (alo + i, blo + j);
        blocks.push(MatchBlock { a_start: i, b_start: j, length: len });
        stack.push((alo, i, blo, j));
        stack.push((i + len, ahi, j + len, bhi));
    }
    blocks.sort_by_key(|blk| blk.a_start);
    blocks
}

/// Total length of the matching blocks divided by the source length in chars.
pub fn directional_overlap(source: &str, target: &str, min_len: usize) -> f64 {
    let (s, t) = encode(source, target);
    directional_encoded(&s, &t, min_len).0
}

fn directional_encoded(s: &[u32], t: &[u32], min_len: usize) -> (f64, Vec<MatchBlock>) {
    if s.is_empty() {
        return (0.0, Vec::new());
    }
    let blocks = matching_blocks_encoded(s, t, min_len);
    let matched: usize = blocks.iter().map(|b| b.length).sum();
    (matched as f64 / s.len() as f64, blocks)
}

/// Forward/backward overlap of two texts, with the block threshold capped at
/// the longer text's length (so two identical texts shorter than `min_len`
/// still overlap fully).
pub fn text_overlap(a: &str, b: &str, min_len: usize) -> OverlapResult {
    let (ea, eb) = encode(a, b);
    if ea.is_empty() && eb.is_empty() {
        return OverlapResult::zero();
    }
    let min_len = min_len.min(ea.len().max(eb.len()));
    let (forward, blocks) = directional_encoded(&ea, &eb, min_len);
    let (backward, _) = directional_encoded(&eb, &ea, min_len);
    OverlapResult { blocks, forward, backward, score: (forward + backward) / 2.0 }
}

/// Text Overlap Score over the normalized descriptions.
pub fn tos(a: &NormalizedPosting, b: &NormalizedPosting) -> OverlapResult {
    text_overlap(&a.norm_description, &b.norm_description, MIN_BLOCK_CHARS)
}

/// Skill Overlap Score over the skill texts; zero when either is empty.
pub fn sos(a: &NormalizedPosting, b: &NormalizedPosting) -> OverlapResult {
    if a.skill_text.is_empty() || b.skill_text.is_empty() {
        return OverlapResult::zero();
    }
    text_overlap(&a.skill_text, &b.skill_text, MIN_BLOCK_CHARS)
}

#[derive(Clone, Debug)]
struct State {
    len: u32,
    link: Option<u32>,
    /// Smallest end position (index of last char) of this state's strings.
    first_end: u32,
    next: Vec<(u32, u32)>,
}

impl State {
    fn go(&self, c: u32) -> Option<u32> {
        self.next.iter().find(|(k, _)| *k == c).map(|(_, v)| *v)
    }

    fn set(&mut self, c: u32, to: u32) {
        match self.next.iter_mut().find(|(k, _)| *k == c) {
            Some(slot) => slot.1 = to,
            None => self.next.push((c, to)),
        }
    }
}

/// Suffix automaton whose state slots (and their transition buffers) are
/// reused across rebuilds; only `states[..used]` is live.
#[derive(Debug, Default)]
struct SuffixAutomaton {
    states: Vec<State>,
    used: usize,
}

impl SuffixAutomaton {
    fn push(&mut self, len: u32, link: Option<u32>, first_end: u32) -> u32 {
        let id = self.used;
        self.used += 1;
        if id == self.states.len() {
            self.states.push(State { len, link, first_end, next: Vec::new() });
        } else {
            let s = &mut self.states[id];
            s.len = len;
            s.link = link;
            s.first_end = first_end;
            s.next.clear();
        }
        id as u32
    }

    fn clone_state(&mut self, q: u32, len: u32) -> u32 {
        let (link, first_end) = (self.states[q as usize].link, self.states[q as usize].first_end);
        let id = self.push(len, link, first_end);
        let (src, dst) = (q as usize, id as usize);
        let (lo, hi) = self.states.split_at_mut(dst);
        hi[0].next.extend_from_slice(&lo[src].next);
        id
    }

    fn rebuild(&mut self, text: &[u32]) {
        self.used = 0;
        self.push(0, None, 0);
        let mut last = 0u32;
        for (pos, &c) in text.iter().enumerate() {
            let cur = self.push(self.states[last as usize].len + 1, None, pos as u32);
            let mut p = Some(last);
            while let Some(pi) = p {
                if self.states[pi as usize].go(c).is_some() {
                    break;
                }
                self.states[pi as usize].set(c, cur);
                p = self.states[pi as usize].link;
            }
            match p {
                None => self.states[cur as usize].link = Some(0),
                Some(pi) => {
                    let q = self.states[pi as usize].go(c).expect("transition checked above");
                    if self.states[pi as usize].len + 1 == self.states[q as usize].len {
                        self.states[cur as usize].link = Some(q);
                    } else {
                        let clone = self.clone_state(q, self.states[pi as usize].len + 1);
                        let mut p = Some(pi);
                        while let Some(pj) = p {
                            if self.states[pj as usize].go(c) != Some(q) {
                                break;
                            }
                            self.states[pj as usize].set(c, clone);
                            p = self.states[pj as usize].link;
                        }
                        self.states[q as usize].link = Some(clone);
                        self.states[cur as usize].link = Some(clone);
                    }
                }
            }
            last = cur;
        }
    }

    /// Longest substring of `query` occurring in the indexed text, as
    /// `(query_start, text_start, len)`. Ties go to the smallest query start,
    /// then the smallest text start.
    fn longest_match(&self, query: &[u32]) -> Option<(usize, usize, usize)> {
        let mut state = 0u32;
        let mut len = 0u32;
        let mut best: Option<(usize, u32, u32)> = None;
        for (i, &c) in query.iter().enumerate() {
            loop {
                if let Some(to) = self.states[state as usize].go(c) {
                    state = to;
                    len += 1;
                    break;
                }
                match self.states[state as usize].link {
                    Some(link) => {
                        state = link;
                        len = self.states[link as usize].len;
                    }
                    None => {
                        len = 0;
                        break;
                    }
                }
            }
            if len > 0 && best.is_none_or(|(_, _, l)| len > l) {
                best = Some((i, state, len));
            }
        }
        best.map(|(end, state, len)| {
            let len = len as usize;
            let text_end = self.states[state as usize].first_end as usize;
            (end + 1 - len, text_end + 1 - len, len)
        })
    }
}
