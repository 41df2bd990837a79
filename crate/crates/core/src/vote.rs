//! Majority voting and per-question reasoning outcomes.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::AnswerSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Direct answer, one sample.
    FewShot,
    /// One generated rationale, one answer.
    Cot,
    /// Independent rationale+answer chains, voted.
    CotSc,
    /// Top-k rationale, several answers, voted.
    Mcr,
    Oo,
    Om,
    Mo,
    Mm,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::FewShot,
        Strategy::Cot,
        Strategy::CotSc,
        Strategy::Mcr,
        Strategy::Oo,
        Strategy::Om,
        Strategy::Mo,
        Strategy::Mm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FewShot => "few_shot",
            Strategy::Cot => "cot",
            Strategy::CotSc => "cot_sc",
            Strategy::Mcr => "mcr",
            Strategy::Oo => "oo",
            Strategy::Om => "om",
            Strategy::Mo => "mo",
            Strategy::Mm => "mm",
        }
    }

    /// Whether the strategy reads from a scored knowledge pool.
    pub fn needs_pool(self) -> bool {
        matches!(self, Strategy::Mcr | Strategy::Oo | Strategy::Om | Strategy::Mo | Strategy::Mm)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStrategy(pub String);

impl fmt::Display for UnknownStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown strategy {:?}", self.0)
    }
}

impl core::error::Error for UnknownStrategy {}

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Strategy::ALL.into_iter().find(|st| st.as_str() == norm).ok_or_else(|| UnknownStrategy(s.into()))
    }
}

/// Vote counts per option over valid samples.
pub fn vote_histogram(samples: &[AnswerSample]) -> BTreeMap<usize, u32> {
    let mut hist = BTreeMap::new();
    for s in samples.iter().filter(|s| s.valid) {
        if let Some(p) = s.parsed {
            *hist.entry(p).or_insert(0) += 1;
        }
    }
    hist
}

/// Most frequent valid answer; ties go to the lowest option index.
pub fn majority_vote(samples: &[AnswerSample]) -> Option<usize> {
    let mut best: Option<(usize, u32)> = None;
    // BTreeMap iterates in ascending option order, so a strict `>` keeps the
    // lowest index among equals.
    for (option, count) in vote_histogram(samples) {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((option, count));
        }
    }
    best.map(|(option, _)| option)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningOutcome {
    pub qid: String,
    pub strategy: Strategy,
    pub samples: Vec<AnswerSample>,
    pub vote_histogram: BTreeMap<usize, u32>,
    #[serde(rename = "final")]
    pub final_answer: Option<usize>,
    pub correct: bool,
    pub tokens_total: u64,
}

impl ReasoningOutcome {
    /// Votes over `samples`. `tokens_total` is the full cost of producing
    /// them, including any rationale-generation calls.
    pub fn from_samples(
        qid: &str,
        strategy: Strategy,
        samples: Vec<AnswerSample>,
        gold: usize,
        tokens_total: u64,
    ) -> Self {
        let vote_histogram = vote_histogram(&samples);
        let final_answer = majority_vote(&samples);
        ReasoningOutcome {
            qid: qid.into(),
            strategy,
            samples,
            vote_histogram,
            final_answer,
            correct: final_answer == Some(gold),
            tokens_total,
        }
    }

    /// True when no sample parsed to an option.
    pub fn all_invalid(&self) -> bool {
        self.final_answer.is_none()
    }
}
