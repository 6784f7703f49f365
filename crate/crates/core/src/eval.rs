//! Confusion counts, precision/recall/F1 and threshold sweeps over labeled
//! pairs.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{pair_key, round6, ScoreBreakdown, ScoreName};
use crate::store::{Label, LabeledPair};

/// Breakdowns keyed by ordered pair (see [`pair_key`]).
pub type Breakdowns = HashMap<(String, String), ScoreBreakdown>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub score: ScoreName,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalRow {
    fn from_counts(score: ScoreName, threshold: f64, tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalRow { score, threshold, tp, fp, fn_, tn, precision, recall, f1 }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn lookup<'a>(labeled: &[LabeledPair], breakdowns: &'a Breakdowns) -> Result<Vec<(&'a ScoreBreakdown, Label)>> {
    let mut missing = Vec::new();
    let mut found = Vec::with_capacity(labeled.len());
    for pair in labeled {
        match breakdowns.get(&pair_key(&pair.id_a, &pair.id_b)) {
            Some(b) => found.push((b, pair.label)),
            None => missing.push((pair.id_a.clone(), pair.id_b.clone())),
        }
    }
    if missing.is_empty() {
        Ok(found)
    } else {
        Err(Error::MissingBreakdowns(missing))
    }
}

fn count(scored: &[(&ScoreBreakdown, Label)], score: ScoreName, threshold: f64) -> EvalRow {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (b, label) in scored {
        let predicted = b.get(score) >= threshold;
        match (predicted, label) {
            (true, Label::Duplicate) => tp += 1,
            (true, Label::NonDuplicate) => fp += 1,
            (false, Label::Duplicate) => fn_ += 1,
            (false, Label::NonDuplicate) => tn += 1,
        }
    }
    EvalRow::from_counts(score, threshold, tp, fp, fn_, tn)
}

/// A pair is predicted duplicate when its `score` is at least `threshold`.
pub fn evaluate(labeled: &[LabeledPair], breakdowns: &Breakdowns, score: ScoreName, threshold: f64) -> Result<EvalRow> {
    Ok(count(&lookup(labeled, breakdowns)?, score, threshold))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<EvalRow>,
    /// Row with the highest F1; ties go to the smallest threshold.
    pub best: EvalRow,
}

/// 0.00, 0.01, ..., 1.00
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) / 100.0).collect()
}

/// One row per grid threshold. Thresholds are capped to `[0, 1]`.
pub fn sweep(labeled: &[LabeledPair], breakdowns: &Breakdowns, score: ScoreName, grid: &[f64]) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::Invalid("threshold grid is empty".into()));
    }
    if grid.iter().any(|t| t.is_nan()) {
        return Err(Error::Invalid("threshold grid contains NaN".into()));
    }
    let scored = lookup(labeled, breakdowns)?;
    let rows: Vec<EvalRow> = grid.iter().map(|t| count(&scored, score, t.clamp(0.0, 1.0))).collect();
    let best = rows
        .iter()
        .fold(None::<&EvalRow>, |best, row| match best {
            Some(b) if b.f1 > row.f1 || (b.f1 == row.f1 && b.threshold <= row.threshold) => Some(b),
            _ => Some(row),
        })
        .expect("grid is non-empty")
        .clone();
    Ok(SweepReport { rows, best })
}

/// Aligned text table with the columns `Matching Score | TH | P | R | F1`
/// followed by the raw confusion counts.
pub fn render_table(rows: &[EvalRow]) -> String {
    let width = rows.iter().map(|r| r.score.label().len()).max().unwrap_or(0).max("Matching Score".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}  {:>5}  {:>5}  {:>5}  {:>5}",
        "Matching Score", "TH", "P", "R", "F1", "TP", "FP", "FN", "TN"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>5.2}  {:>5.2}  {:>5.2}  {:>5.2}  {:>5}  {:>5}  {:>5}  {:>5}",
            r.score.label(),
            r.threshold,
            r.precision,
            r.recall,
            r.f1,
            r.tp,
            r.fp,
            r.fn_,
            r.tn
        );
    }
    out
}

pub fn rows_to_csv(rows: &[EvalRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["score", "threshold", "tp", "fp", "fn", "tn", "precision", "recall", "f1"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.score.as_str().to_owned(),
            r.threshold.to_string(),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_.to_string(),
            r.tn.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// `pair_id_a,pair_id_b,label,score` rows, with scores at the same 6-place
/// precision as serialized breakdowns.
pub fn score_distribution_csv(labeled: &[LabeledPair], breakdowns: &Breakdowns, score: ScoreName) -> Result<String> {
    let scored = lookup(labeled, breakdowns)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair_id_a", "pair_id_b", "label", "score"]).map_err(csv_err)?;
    for (pair, (b, label)) in labeled.iter().zip(scored) {
        let label = match label {
            Label::Duplicate => "duplicate",
            Label::NonDuplicate => "non_duplicate",
        };
        w.write_record([pair.id_a.as_str(), pair.id_b.as_str(), label, &round6(b.get(score)).to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
