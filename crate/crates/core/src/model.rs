//! Domain types shared by every pipeline stage.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::parse::parse_answer;

/// A multiple-choice commonsense question with its gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub stem: String,
    pub options: Vec<String>,
    /// 0-based index into `options`.
    pub gold: usize,
    pub dataset_tag: String,
}

impl Question {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.options.len() < 2 {
            return Err(ModelError::TooFewOptions { qid: self.id.clone(), count: self.options.len() });
        }
        if self.gold >= self.options.len() {
            return Err(ModelError::GoldOutOfRange {
                qid: self.id.clone(),
                gold: self.gold,
                options: self.options.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for opt in &self.options {
            if !seen.insert(opt.as_str()) {
                return Err(ModelError::DuplicateOption { qid: self.id.clone(), option: opt.clone() });
            }
        }
        Ok(())
    }

    pub fn gold_text(&self) -> &str {
        &self.options[self.gold]
    }
}

/// Confidence level of a knowledge piece, from its effect on the answer.
///
/// | level | direct answer | answer with knowledge |
/// |-------|---------------|-----------------------|
/// | 0 Useful    | wrong   | correct |
/// | 1 Harmless  | correct | correct |
/// | 2 Useless   | wrong   | wrong   |
/// | 3 Harmful   | correct | wrong   |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Level {
    Useful,
    Harmless,
    Useless,
    Harmful,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Useful, Level::Harmless, Level::Useless, Level::Harmful];

    pub fn from_correctness(direct_correct: bool, with_knowledge_correct: bool) -> Level {
        match (direct_correct, with_knowledge_correct) {
            (false, true) => Level::Useful,
            (true, true) => Level::Harmless,
            (false, false) => Level::Useless,
            (true, false) => Level::Harmful,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Level::Useful => 0,
            Level::Harmless => 1,
            Level::Useless => 2,
            Level::Harmful => 3,
        }
    }

    pub fn label(self) -> Label {
        match self {
            Level::Useful | Level::Harmless => Label::Positive,
            Level::Useless | Level::Harmful => Label::Negative,
        }
    }
}

impl TryFrom<u8> for Level {
    type Error = ModelError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Level::Useful),
            1 => Ok(Level::Harmless),
            2 => Ok(Level::Useless),
            3 => Ok(Level::Harmful),
            other => Err(ModelError::BadLevel(other)),
        }
    }
}

impl From<Level> for u8 {
    fn from(l: Level) -> u8 {
        l.as_u8()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// One elicited knowledge piece and, once labeled and scored, its verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub qid: String,
    pub kid: String,
    pub text: String,
    pub sample_index: u32,
    pub gen_temperature: f64,
    pub level: Option<Level>,
    pub label: Option<Label>,
    pub score: Option<f64>,
}

impl KnowledgeRecord {
    pub fn unlabeled(qid: &str, sample_index: u32, text: String, gen_temperature: f64) -> Self {
        KnowledgeRecord {
            qid: qid.into(),
            kid: kid_for(qid, sample_index),
            text,
            sample_index,
            gen_temperature,
            level: None,
            label: None,
            score: None,
        }
    }

    /// Sets the level together with the label it implies.
    pub fn set_level(&mut self, level: Level) {
        self.level = Some(level);
        self.label = Some(level.label());
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match (self.level, self.label) {
            (None, Some(_)) => return Err(ModelError::LabelWithoutLevel(self.kid.clone())),
            (Some(level), Some(label)) if level.label() != label => {
                return Err(ModelError::LabelMismatch(self.kid.clone()))
            }
            _ => {}
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(ModelError::ScoreOutOfRange(self.kid.clone()));
            }
        }
        Ok(())
    }
}

/// Knowledge ids are `<qid>-k<index>`, zero-padded so lexicographic order
/// follows sample order.
pub fn kid_for(qid: &str, sample_index: u32) -> String {
    alloc::format!("{qid}-k{sample_index:03}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Direct,
    WithKnowledge,
}

/// One parsed answer attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSample {
    pub qid: String,
    pub condition: Condition,
    pub rationale_ids: Vec<String>,
    pub raw_text: String,
    pub parsed: Option<usize>,
    pub valid: bool,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

impl AnswerSample {
    /// Parses `raw_text` against the question's options.
    pub fn from_completion(
        q: &Question,
        rationale_ids: Vec<String>,
        raw_text: String,
        tokens_in: u64,
        tokens_out: u64,
    ) -> Self {
        let parsed = parse_answer(&raw_text, &q.options);
        let condition = if rationale_ids.is_empty() { Condition::Direct } else { Condition::WithKnowledge };
        AnswerSample {
            qid: q.id.clone(),
            condition,
            rationale_ids,
            raw_text,
            parsed,
            valid: parsed.is_some(),
            tokens_in,
            tokens_out,
        }
    }

    pub fn is_correct(&self, gold: usize) -> bool {
        self.valid && self.parsed == Some(gold)
    }

    pub fn tokens(&self) -> u64 {
        self.tokens_in + self.tokens_out
    }
}

/// Sampling constants and backend locations for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub knowledge_temperature: f64,
    pub knowledge_samples: u32,
    pub answer_temperature: f64,
    pub answer_samples: u32,
    pub top_k: u32,
    pub llm_endpoint: String,
    pub scorer_endpoint: Option<String>,
    pub cache_dir: String,
    pub concurrency_limit: u32,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            knowledge_temperature: 1.3,
            knowledge_samples: 5,
            answer_temperature: 0.7,
            answer_samples: 3,
            top_k: 2,
            llm_endpoint: String::from("https://api.openai.com/v1"),
            scorer_endpoint: None,
            cache_dir: String::from(".linked-cache"),
            concurrency_limit: 8,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.knowledge_samples < 1 {
            return Err(ConfigError::new("knowledge_samples", "must be at least 1"));
        }
        if self.answer_samples < 1 {
            return Err(ConfigError::new("answer_samples", "must be at least 1"));
        }
        if self.top_k < 1 || self.top_k > self.knowledge_samples {
            return Err(ConfigError::new("top_k", "must satisfy 1 <= top_k <= knowledge_samples"));
        }
        if self.knowledge_temperature.is_nan() || self.knowledge_temperature < 0.0 {
            return Err(ConfigError::new("knowledge_temperature", "must be >= 0"));
        }
        if self.answer_temperature.is_nan() || self.answer_temperature < 0.0 {
            return Err(ConfigError::new("answer_temperature", "must be >= 0"));
        }
        if self.concurrency_limit < 1 {
            return Err(ConfigError::new("concurrency_limit", "must be at least 1"));
        }
        if self.llm_endpoint.trim().is_empty() {
            return Err(ConfigError::new("llm_endpoint", "must not be empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: &'static str,
}

impl ConfigError {
    pub fn new(field: &'static str, reason: &'static str) -> Self {
        ConfigError { field, reason }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {} {}", self.field, self.reason)
    }
}

impl core::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    TooFewOptions { qid: String, count: usize },
    GoldOutOfRange { qid: String, gold: usize, options: usize },
    DuplicateOption { qid: String, option: String },
    BadLevel(u8),
    LabelWithoutLevel(String),
    LabelMismatch(String),
    ScoreOutOfRange(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::TooFewOptions { qid, count } => {
                write!(f, "question {qid}: needs at least 2 options, got {count}")
            }
            ModelError::GoldOutOfRange { qid, gold, options } => {
                write!(f, "question {qid}: answer index {gold} out of range for {options} options")
            }
            ModelError::DuplicateOption { qid, option } => {
                write!(f, "question {qid}: duplicate option {option:?}")
            }
            ModelError::BadLevel(v) => write!(f, "level must be 0..=3, got {v}"),
            ModelError::LabelWithoutLevel(kid) => write!(f, "knowledge {kid}: label set without level"),
            ModelError::LabelMismatch(kid) => {
                write!(f, "knowledge {kid}: label disagrees with level")
            }
            ModelError::ScoreOutOfRange(kid) => write!(f, "knowledge {kid}: score outside [0, 1]"),
        }
    }
}

impl core::error::Error for ModelError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn q(options: &[&str], gold: usize) -> Question {
        Question {
            id: "w1".into(),
            stem: "stem".into(),
            options: options.iter().map(|s| String::from(*s)).collect(),
            gold,
            dataset_tag: "t".into(),
        }
    }

    #[test]
    fn question_invariants() {
        assert!(q(&["floors", "cabinets", "None"], 0).validate().is_ok());
        assert!(matches!(q(&["a", "b", "c"], 5).validate(), Err(ModelError::GoldOutOfRange { gold: 5, .. })));
        assert!(matches!(q(&["a"], 0).validate(), Err(ModelError::TooFewOptions { .. })));
        assert!(matches!(q(&["a", "a"], 0).validate(), Err(ModelError::DuplicateOption { .. })));
    }

    #[test]
    fn level_label_rule() {
        assert_eq!(Level::Useful.label(), Label::Positive);
        assert_eq!(Level::Harmless.label(), Label::Positive);
        assert_eq!(Level::Useless.label(), Label::Negative);
        assert_eq!(Level::Harmful.label(), Label::Negative);
        for l in Level::ALL {
            assert_eq!(Level::try_from(l.as_u8()), Ok(l));
        }
        assert_eq!(Level::try_from(4), Err(ModelError::BadLevel(4)));
    }

    #[test]
    fn level_serializes_as_integer() {
        let s = serde_json::to_string(&Level::Useless).unwrap();
        assert_eq!(s, "2");
        assert!(serde_json::from_str::<Level>("7").is_err());
    }

    #[test]
    fn record_validation() {
        let mut r = KnowledgeRecord::unlabeled("q", 0, "t".into(), 1.3);
        assert_eq!(r.kid, "q-k000");
        assert!(r.validate().is_ok());
        r.label = Some(Label::Positive);
        assert!(r.validate().is_err());
        r.set_level(Level::Harmful);
        assert_eq!(r.label, Some(Label::Negative));
        assert!(r.validate().is_ok());
        r.label = Some(Label::Positive);
        assert_eq!(r.validate(), Err(ModelError::LabelMismatch("q-k000".into())));
        r.set_level(Level::Harmful);
        r.score = Some(1.5);
        assert!(r.validate().is_err());
    }

    #[test]
    fn answer_sample_validity() {
        let question = q(&["floors", "cabinets", "None"], 0);
        let s = AnswerSample::from_completion(&question, vec![], "Answer: (2)".into(), 3, 2);
        assert_eq!(s.parsed, Some(1));
        assert!(s.valid);
        assert_eq!(s.condition, Condition::Direct);
        assert!(!s.is_correct(0));
        let s = AnswerSample::from_completion(&question, vec!["w1-k000".into()], "I cannot decide.".into(), 3, 2);
        assert_eq!(s.parsed, None);
        assert!(!s.valid);
        assert_eq!(s.condition, Condition::WithKnowledge);
    }

    #[test]
    fn run_config_defaults_and_bounds() {
        let c = RunConfig::default();
        assert_eq!(c.knowledge_temperature, 1.3);
        assert_eq!(c.knowledge_samples, 5);
        assert_eq!(c.answer_temperature, 0.7);
        assert_eq!(c.answer_samples, 3);
        assert_eq!(c.top_k, 2);
        assert!(c.validate().is_ok());

        let bad = RunConfig { top_k: 6, ..RunConfig::default() };
        assert_eq!(bad.validate().unwrap_err().field, "top_k");
        let bad = RunConfig { answer_temperature: -0.1, ..RunConfig::default() };
        assert_eq!(bad.validate().unwrap_err().field, "answer_temperature");
        let bad = RunConfig { answer_samples: 0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { concurrency_limit: 0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
    }
}
