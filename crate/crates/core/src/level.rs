use alloc::string::String;
use core::fmt;

use crate::model::{AnswerSample, Condition, Level};

/// Levels a knowledge piece from the direct answer and the answer given
/// with that knowledge. Unparseable samples count as wrong.
pub fn assign_level(direct: &AnswerSample, with_knowledge: &AnswerSample, gold: usize) -> Result<Level, LevelError> {
    if direct.qid != with_knowledge.qid {
        return Err(LevelError::QidMismatch { direct: direct.qid.clone(), with_knowledge: with_knowledge.qid.clone() });
    }
    if direct.condition != Condition::Direct || with_knowledge.condition != Condition::WithKnowledge {
        return Err(LevelError::ConditionMismatch(direct.qid.clone()));
    }
    Ok(Level::from_correctness(direct.is_correct(gold), with_knowledge.is_correct(gold)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelError {
    QidMismatch { direct: String, with_knowledge: String },
    ConditionMismatch(String),
}

impl fmt::Display for LevelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelError::QidMismatch { direct, with_knowledge } => {
                write!(f, "direct sample is for {direct} but knowledge sample is for {with_knowledge}")
            }
            LevelError::ConditionMismatch(qid) => {
                write!(f, "question {qid}: expected one direct and one with-knowledge sample")
            }
        }
    }
}

impl core::error::Error for LevelError {}
