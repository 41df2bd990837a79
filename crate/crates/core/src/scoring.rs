//! Knowledge scoring, per-question ranking, and top-k rationale assembly.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{KnowledgeRecord, Question};

/// Anything that can score a question's knowledge pieces into `[0, 1]`.
pub trait KnowledgeScorer: Send + Sync {
    /// One score per record, in input order.
    fn score(&self, q: &Question, records: &[KnowledgeRecord]) -> Result<Vec<f64>, ScoreError>;
}

/// Scores by label: 1.0 for positive, 0.0 for negative.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl KnowledgeScorer for OracleScorer {
    fn score(&self, _q: &Question, records: &[KnowledgeRecord]) -> Result<Vec<f64>, ScoreError> {
        records.iter().map(oracle_score).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl KnowledgeScorer for ConstantScorer {
    fn score(&self, _q: &Question, records: &[KnowledgeRecord]) -> Result<Vec<f64>, ScoreError> {
        Ok(records.iter().map(|_| self.0).collect())
    }
}

pub fn oracle_score(record: &KnowledgeRecord) -> Result<f64, ScoreError> {
    match record.label {
        Some(label) if label.is_positive() => Ok(1.0),
        Some(_) => Ok(0.0),
        None => Err(ScoreError::Unlabeled(record.kid.clone())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredKnowledge {
    pub record: KnowledgeRecord,
    /// 1-based rank within the question.
    pub rank: u32,
}

impl ScoredKnowledge {
    pub fn score(&self) -> f64 {
        self.record.score.unwrap_or(0.0)
    }
}

/// Higher score first, then lower kid.
fn rank_order(a: (&f64, &str), b: (&f64, &str)) -> Ordering {
    b.0.partial_cmp(a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1))
}

/// Scores `records` for `q` and ranks them. The returned list keeps input
/// order; each entry carries its score and rank.
pub fn score_batch(
    q: &Question,
    records: &[KnowledgeRecord],
    scorer: &dyn KnowledgeScorer,
) -> Result<Vec<ScoredKnowledge>, ScoreError> {
    if records.is_empty() {
        return Err(ScoreError::Empty(q.id.clone()));
    }
    if let Some(r) = records.iter().find(|r| r.qid != q.id) {
        return Err(ScoreError::ForeignRecord { qid: q.id.clone(), kid: r.kid.clone() });
    }
    let scores = scorer.score(q, records)?;
    rank_scores(records, &scores)
}

/// Attaches `scores` to `records` and assigns ranks.
pub fn rank_scores(records: &[KnowledgeRecord], scores: &[f64]) -> Result<Vec<ScoredKnowledge>, ScoreError> {
    if scores.len() != records.len() {
        return Err(ScoreError::LengthMismatch { expected: records.len(), got: scores.len() });
    }
    for (i, &s) in scores.iter().enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(ScoreError::OutOfRange { index: i, value: s });
        }
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| rank_order((&scores[a], records[a].kid.as_str()), (&scores[b], records[b].kid.as_str())));
    let mut ranks = alloc::vec![0u32; records.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos as u32 + 1;
    }
    Ok(records
        .iter()
        .zip(scores)
        .zip(ranks)
        .map(|((r, &s), rank)| {
            let mut record = r.clone();
            record.score = Some(s);
            ScoredKnowledge { record, rank }
        })
        .collect())
}

/// The conditioning text built from the best-ranked knowledge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rationale {
    pub text: String,
    pub kids: Vec<String>,
}

/// Concatenates the `top_k` best-ranked texts, newline-separated, in rank
/// order. `top_k` larger than the pool uses the whole pool.
pub fn select_rationale(scored: &[ScoredKnowledge], top_k: usize) -> Rationale {
    let ranked = by_rank(scored);
    let take = top_k.max(1).min(ranked.len());
    let chosen = &ranked[..take];
    let mut text = String::new();
    for (i, s) in chosen.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&s.record.text);
    }
    Rationale { text, kids: chosen.iter().map(|s| s.record.kid.clone()).collect() }
}

/// References to `scored` sorted by ascending rank.
pub fn by_rank(scored: &[ScoredKnowledge]) -> Vec<&ScoredKnowledge> {
    let mut ranked: Vec<&ScoredKnowledge> = scored.iter().collect();
    ranked.sort_by_key(|s| s.rank);
    ranked
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreError {
    Empty(String),
    ForeignRecord { qid: String, kid: String },
    Unlabeled(String),
    LengthMismatch { expected: usize, got: usize },
    OutOfRange { index: usize, value: f64 },
    Unreachable(String),
    Backend(String),
}

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreError::Empty(qid) => write!(f, "question {qid} has no knowledge to score"),
            ScoreError::ForeignRecord { qid, kid } => {
                write!(f, "knowledge {kid} does not belong to question {qid}")
            }
            ScoreError::Unlabeled(kid) => write!(f, "oracle scorer needs a label on knowledge {kid}"),
            ScoreError::LengthMismatch { expected, got } => {
                write!(f, "scorer returned {got} scores for {expected} pairs")
            }
            ScoreError::OutOfRange { index, value } => {
                write!(f, "score {value} at position {index} is outside [0, 1]")
            }
            ScoreError::Unreachable(msg) => write!(f, "scorer unreachable: {msg}"),
            ScoreError::Backend(msg) => write!(f, "scorer error: {msg}"),
        }
    }
}

impl core::error::Error for ScoreError {}
