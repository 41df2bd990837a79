//! Turns a labeled knowledge pool into scorer training data.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{KnowledgeRecord, Label, Question};
use crate::prompt::render_options;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTriple {
    pub qid: String,
    #[serde(rename = "question")]
    pub question_text: String,
    #[serde(rename = "knowledge")]
    pub knowledge_text: String,
    /// 1 = positive, 0 = negative.
    #[serde(rename = "label")]
    pub y: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl SplitSpec {
    pub fn with_val_fraction(val_fraction: f64) -> Self {
        SplitSpec { train_fraction: 1.0 - val_fraction, val_fraction }
    }
}

/// Stem followed by the 1-based option list.
pub fn question_text(q: &Question) -> String {
    format!("{}\n{}", q.stem, render_options(&q.options))
}

/// Drops single-polarity questions, labels the rest, and splits by question.
///
/// Questions are shuffled under `seed` and cut into a train prefix and a
/// validation slice; no question contributes to both. Each split is sorted
/// by (qid, kid).
pub fn prepare_training_set(
    pool: &[KnowledgeRecord],
    questions: &[Question],
    split: SplitSpec,
    seed: u64,
) -> Result<(Vec<TrainTriple>, Vec<TrainTriple>), PrepError> {
    let SplitSpec { train_fraction, val_fraction } = split;
    if !(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction <= 1.0 + 1e-9) {
        return Err(PrepError::BadFractions);
    }
    let by_id: BTreeMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();

    let mut grouped: BTreeMap<&str, Vec<&KnowledgeRecord>> = BTreeMap::new();
    for r in pool {
        if r.level.is_none() || r.label.is_none() {
            return Err(PrepError::Unlabeled(r.kid.clone()));
        }
        if !by_id.contains_key(r.qid.as_str()) {
            return Err(PrepError::UnknownQuestion(r.qid.clone()));
        }
        grouped.entry(r.qid.as_str()).or_default().push(r);
    }

    let mut mixed: Vec<&str> = grouped
        .iter()
        .filter(|(_, rs)| {
            let pos = rs.iter().filter(|r| r.label == Some(Label::Positive)).count();
            pos > 0 && pos < rs.len()
        })
        .map(|(qid, _)| *qid)
        .collect();
    if mixed.is_empty() {
        return Err(PrepError::EmptyAfterFilter);
    }

    let n = mixed.len();
    let n_val = round_count(val_fraction, n).max(1);
    let n_train = round_count(train_fraction, n).min(n - n_val.min(n));
    if n_val >= n || n_train == 0 {
        return Err(PrepError::DegenerateSplit { questions: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mixed.shuffle(&mut rng);

    let build = |qids: &[&str]| -> Vec<TrainTriple> {
        let mut ids: Vec<&str> = qids.to_vec();
        ids.sort_unstable();
        let mut out = Vec::new();
        for qid in ids {
            let q = by_id[qid];
            let text = question_text(q);
            let mut recs = grouped[qid].clone();
            recs.sort_by(|a, b| a.kid.cmp(&b.kid));
            for r in recs {
                out.push(TrainTriple {
                    qid: qid.into(),
                    question_text: text.clone(),
                    knowledge_text: r.text.clone(),
                    y: u8::from(r.label == Some(Label::Positive)),
                });
            }
        }
        out
    };
    let train = build(&mixed[..n_train]);
    let val = build(&mixed[n_train..n_train + n_val]);
    Ok((train, val))
}

fn round_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64 + 0.5;
    if x <= 0.0 {
        0
    } else {
        (x as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrepError {
    BadFractions,
    Unlabeled(String),
    UnknownQuestion(String),
    EmptyAfterFilter,
    DegenerateSplit { questions: usize },
}

impl fmt::Display for PrepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrepError::BadFractions => f.write_str("split fractions must be positive and sum to at most 1"),
            PrepError::Unlabeled(kid) => write!(f, "knowledge {kid} has no level/label"),
            PrepError::UnknownQuestion(qid) => write!(f, "pool references unknown question {qid}"),
            PrepError::EmptyAfterFilter => f.write_str("no question has both positive and negative knowledge"),
            PrepError::DegenerateSplit { questions } => {
                write!(f, "{questions} usable questions cannot fill both a train and a validation split")
            }
        }
    }
}

impl core::error::Error for PrepError {}
