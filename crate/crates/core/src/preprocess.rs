//! Text normalization and skill-term extraction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::store::{JobPosting, SkillLexicon};

/// Non-alphanumeric characters kept because they occur inside skill names
/// (`c++`, `s/4 hana`, `c#`, `.net`).
pub const PRESERVED_SPECIALS: [char; 4] = ['+', '/', '#', '.'];

fn is_kept(c: char) -> bool {
    c.is_alphabetic() || c.is_numeric() || PRESERVED_SPECIALS.contains(&c)
}

/// NFKC, lowercase, every other character becomes a space, whitespace runs
/// collapse to one space, trimmed.
pub fn normalize_text(raw: &str) -> String {
    let lowered: String = raw.nfkc().flat_map(char::to_lowercase).collect();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for c in lowered.nfkc() {
        if is_kept(c) {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillOccurrence {
    pub term: String,
    /// Char (not byte) offset into the normalized description.
    pub offset: usize,
}

struct Token {
    byte_start: usize,
    byte_end: usize,
    char_start: usize,
}

fn tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (chars, (byte, c)) in text.char_indices().enumerate() {
        if c == ' ' {
            if let Some((b, ch)) = start.take() {
                out.push(Token { byte_start: b, byte_end: byte, char_start: ch });
            }
        } else if start.is_none() {
            start = Some((byte, chars));
        }
    }
    if let Some((b, ch)) = start {
        out.push(Token { byte_start: b, byte_end: text.len(), char_start: ch });
    }
    out
}

/// Left-to-right longest-match scan over whole words. A match consumes its
/// words, so occurrences never overlap; repeated terms are all kept.
pub fn extract_skills(norm_text: &str, lexicon: &SkillLexicon) -> Vec<SkillOccurrence> {
    let toks = tokens(norm_text);
    let max_words = lexicon.max_words();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let longest = max_words.min(toks.len() - i);
        let hit = (1..=longest).rev().find_map(|n| {
            let span = &norm_text[toks[i].byte_start..toks[i + n - 1].byte_end];
            lexicon.contains(span).then_some((n, span))
        });
        match hit {
            Some((n, span)) => {
                out.push(SkillOccurrence { term: span.to_owned(), offset: toks[i].char_start });
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

/// The three text views every scorer reads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedPosting {
    pub posting_id: String,
    pub norm_title: String,
    pub norm_description: String,
    pub skill_occurrences: Vec<SkillOccurrence>,
    /// Extracted terms joined by single spaces, in document order.
    pub skill_text: String,
    pub distinct_skills: BTreeSet<String>,
}

impl NormalizedPosting {
    /// Title, description and skill text joined with single spaces; the
    /// input of the all-text embedding.
    pub fn all_text(&self) -> String {
        format!("{} {} {}", self.norm_title, self.norm_description, self.skill_text)
    }
}

pub fn build_normalized(posting: &JobPosting, lexicon: &SkillLexicon) -> NormalizedPosting {
    let norm_title = normalize_text(&posting.title);
    let norm_description = normalize_text(&posting.description);
    let skill_occurrences = extract_skills(&norm_description, lexicon);
    let skill_text = skill_occurrences
        .iter()
        .map(|o| o.term.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let distinct_skills = skill_occurrences.iter().map(|o| o.term.clone()).collect();
    NormalizedPosting {
        posting_id: posting.id.clone(),
        norm_title,
        norm_description,
        skill_occurrences,
        skill_text,
        distinct_skills,
    }
}
