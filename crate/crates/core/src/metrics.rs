//! Accuracy and the effectiveness / preservation / EPS scores.
//!
//! The few-shot direct-answer run splits questions into those it gets right
//! (`Q_true`) and wrong (`Q_false`). A method's effectiveness score (ES) is
//! the share of `Q_false` it answers correctly; its preservation score (PS)
//! is one minus the share of `Q_true` it breaks. EPS is their harmonic mean.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::vote::ReasoningOutcome;

pub fn accuracy(outcomes: &[ReasoningOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    index_by_qid(outcomes)?;
    let correct = outcomes.iter().filter(|o| o.correct).count();
    Ok(correct as f64 / outcomes.len() as f64)
}

fn index_by_qid(outcomes: &[ReasoningOutcome]) -> Result<BTreeMap<&str, &ReasoningOutcome>, MetricsError> {
    let mut map = BTreeMap::new();
    for o in outcomes {
        if map.insert(o.qid.as_str(), o).is_some() {
            return Err(MetricsError::DuplicateQid(o.qid.clone()));
        }
    }
    Ok(map)
}

/// Harmonic mean, 0 when both terms are 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsScores {
    pub es: Option<f64>,
    pub ps: Option<f64>,
    pub eps: Option<f64>,
    pub q_true_size: usize,
    pub q_false_size: usize,
    pub note: Option<String>,
}

/// ES, PS and EPS of `method` against the few-shot `baseline`.
pub fn eps(baseline: &[ReasoningOutcome], method: &[ReasoningOutcome]) -> Result<EpsScores, MetricsError> {
    let base = index_by_qid(baseline)?;
    let meth = index_by_qid(method)?;
    let base_ids: BTreeSet<&str> = base.keys().copied().collect();
    let meth_ids: BTreeSet<&str> = meth.keys().copied().collect();
    if base_ids != meth_ids {
        let missing = base_ids.symmetric_difference(&meth_ids).count();
        return Err(MetricsError::QidSetMismatch { differing: missing });
    }

    let (mut q_true, mut q_false) = (0usize, 0usize);
    let (mut fixed, mut broken) = (0usize, 0usize);
    for (qid, b) in &base {
        let m_correct = meth[qid].correct;
        if b.correct {
            q_true += 1;
            if !m_correct {
                broken += 1;
            }
        } else {
            q_false += 1;
            if m_correct {
                fixed += 1;
            }
        }
    }

    let es = (q_false > 0).then(|| fixed as f64 / q_false as f64);
    let ps = (q_true > 0).then(|| 1.0 - broken as f64 / q_true as f64);
    let (eps, note) = match (es, ps) {
        (Some(es), Some(ps)) => (Some(harmonic_mean(es, ps)), None),
        (None, Some(_)) => (None, Some(String::from("baseline answered every question correctly; ES undefined"))),
        (Some(_), None) => (None, Some(String::from("baseline answered every question wrongly; PS undefined"))),
        (None, None) => (None, Some(String::from("no questions evaluated"))),
    };
    Ok(EpsScores { es, ps, eps, q_true_size: q_true, q_false_size: q_false, note })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionResult {
    #[serde(rename = "final")]
    pub final_answer: Option<usize>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset_tag: String,
    pub seed: Option<u64>,
    pub accuracy: f64,
    pub es: Option<f64>,
    pub ps: Option<f64>,
    pub eps: Option<f64>,
    pub q_true_size: usize,
    pub q_false_size: usize,
    pub avg_tokens: f64,
    pub per_question: BTreeMap<String, QuestionResult>,
    pub note: Option<String>,
}

/// Builds a report for `method` against `baseline`. `avg_tokens` is the
/// method's total token spend divided by its question count.
pub fn evaluate(
    name: &str,
    dataset_tag: &str,
    seed: Option<u64>,
    baseline: &[ReasoningOutcome],
    method: &[ReasoningOutcome],
) -> Result<EvalReport, MetricsError> {
    let acc = accuracy(method)?;
    let scores = eps(baseline, method)?;
    let total: u64 = method.iter().map(|o| o.tokens_total).sum();
    let per_question = method
        .iter()
        .map(|o| (o.qid.clone(), QuestionResult { final_answer: o.final_answer, correct: o.correct }))
        .collect();
    Ok(EvalReport {
        method: name.into(),
        dataset_tag: dataset_tag.into(),
        seed,
        accuracy: acc,
        es: scores.es,
        ps: scores.ps,
        eps: scores.eps,
        q_true_size: scores.q_true_size,
        q_false_size: scores.q_false_size,
        avg_tokens: total as f64 / method.len() as f64,
        per_question,
        note: scores.note,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    Empty,
    DuplicateQid(String),
    QidSetMismatch { differing: usize },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::Empty => f.write_str("no outcomes to evaluate"),
            MetricsError::DuplicateQid(qid) => write!(f, "question {qid} appears more than once"),
            MetricsError::QidSetMismatch { differing } => {
                write!(f, "baseline and method cover different questions ({differing} differ)")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// Convenience for tests and reports: outcomes with only `qid` and
/// `correct` meaningful.
pub fn outcomes_from_correctness(prefix: &str, correct: &[bool]) -> Vec<ReasoningOutcome> {
    correct
        .iter()
        .enumerate()
        .map(|(i, &c)| ReasoningOutcome {
            qid: alloc::format!("{prefix}{i}"),
            strategy: crate::vote::Strategy::FewShot,
            samples: Vec::new(),
            vote_histogram: BTreeMap::new(),
            final_answer: c.then_some(0),
            correct: c,
            tokens_total: 0,
        })
        .collect()
}
