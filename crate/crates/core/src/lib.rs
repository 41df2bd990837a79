//! Core primitives for knowledge-augmented commonsense question answering.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std`: the domain types, prompt rendering, answer parsing,
//! the four-level knowledge taxonomy, a deterministic mock LLM world,
//! knowledge ranking and rationale assembly, majority voting, and the
//! accuracy / ES / PS / EPS metrics. IO, HTTP and orchestration live in the
//! `linked` crate.

#![no_std]

extern crate alloc;

mod hash;

pub mod chat;
pub mod level;
pub mod metrics;
pub mod mock;
pub mod model;
pub mod parse;
pub mod prep;
pub mod prompt;
pub mod scoring;
pub mod vote;

pub use chat::{ChatRequest, ChatResponse, Completion, Message, PromptTag, Role};
pub use level::{assign_level, LevelError};
pub use metrics::{accuracy, eps, evaluate, EpsScores, EvalReport, MetricsError, QuestionResult};
pub use mock::{mock_complete, mock_sample, MockWorldSpec};
pub use model::{AnswerSample, Condition, ConfigError, KnowledgeRecord, Label, Level, ModelError, Question, RunConfig};
pub use parse::parse_answer;
pub use prep::{prepare_training_set, PrepError, SplitSpec, TrainTriple};
pub use prompt::{render_options, render_prompt, PromptError};
pub use scoring::{
    oracle_score, rank_scores, score_batch, select_rationale, ConstantScorer, KnowledgeScorer, OracleScorer, Rationale,
    ScoreError, ScoredKnowledge,
};
pub use vote::{majority_vote, vote_histogram, ReasoningOutcome, Strategy, UnknownStrategy};
