//! Few-shot prompt templates for the three prompt families.
//!
//! Options are rendered 1-based as `(1) a (2) b`. Every template ends with a
//! user turn holding the target question verbatim; knowledge, when present,
//! precedes the question inside that turn.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::chat::{Message, PromptTag, Role};
use crate::model::Question;

struct Exemplar {
    question: &'static str,
    options: &'static [&'static str],
    knowledge: &'static str,
    answer: usize,
}

const EXEMPLARS: [Exemplar; 3] = [
    Exemplar {
        question: "Sam poured the hot soup into the bowl instead of the cup because the _ was larger.",
        options: &["bowl", "cup"],
        knowledge: "A larger container can hold more liquid, so people pour soup into the bigger vessel.",
        answer: 0,
    },
    Exemplar {
        question: "Where would you most likely keep milk so that it stays fresh?",
        options: &["cupboard", "refrigerator", "mailbox"],
        knowledge: "Milk spoils quickly at room temperature and is kept cold to slow bacterial growth.",
        answer: 1,
    },
    Exemplar {
        question: "The runner drank a lot of water after the race because she was _.",
        options: &["thirsty", "sleepy"],
        knowledge: "Running for a long time makes the body lose water through sweat, which causes thirst.",
        answer: 0,
    },
];

const DIRECT_SYSTEM: &str = "You are answering commonsense multiple-choice questions. \
Reply with the number of the correct option in the form \"Answer: (n)\".";

const KNOWLEDGE_SYSTEM: &str = "You are answering commonsense multiple-choice questions. \
Use the provided knowledge if it helps. \
Reply with the number of the correct option in the form \"Answer: (n)\".";

const GEN_SYSTEM: &str = "Generate one self-contained commonsense statement that is relevant \
to the question. Do not state which option is correct.";

/// `(1) a (2) b ...`
pub fn render_options<S: AsRef<str>>(options: &[S]) -> String {
    let mut out = String::new();
    for (i, opt) in options.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("({}) {}", i + 1, opt.as_ref()));
    }
    out
}

fn question_block<S: AsRef<str>>(stem: &str, options: &[S]) -> String {
    format!("Question: {stem}\nOptions: {}", render_options(options))
}

fn answer_line(index: usize) -> String {
    format!("Answer: ({})", index + 1)
}

pub fn render_prompt(q: &Question, tag: PromptTag, knowledge: Option<&str>) -> Result<Vec<Message>, PromptError> {
    let mut messages = Vec::with_capacity(2 + 2 * EXEMPLARS.len());
    match tag {
        PromptTag::DirectAnswer => {
            messages.push(Message::new(Role::System, DIRECT_SYSTEM));
            for ex in &EXEMPLARS {
                messages.push(Message::new(Role::User, question_block(ex.question, ex.options)));
                messages.push(Message::new(Role::Assistant, answer_line(ex.answer)));
            }
            messages.push(Message::new(Role::User, question_block(&q.stem, &q.options)));
        }
        PromptTag::KnowledgeAnswer => {
            let knowledge = knowledge.ok_or(PromptError::MissingKnowledge)?;
            messages.push(Message::new(Role::System, KNOWLEDGE_SYSTEM));
            for ex in &EXEMPLARS {
                messages.push(Message::new(
                    Role::User,
                    format!("Knowledge: {}\n{}", ex.knowledge, question_block(ex.question, ex.options)),
                ));
                messages.push(Message::new(Role::Assistant, answer_line(ex.answer)));
            }
            messages.push(Message::new(
                Role::User,
                format!("Knowledge: {knowledge}\n{}", question_block(&q.stem, &q.options)),
            ));
        }
        PromptTag::KnowledgeGen => {
            messages.push(Message::new(Role::System, GEN_SYSTEM));
            for ex in &EXEMPLARS {
                messages.push(Message::new(Role::User, question_block(ex.question, ex.options)));
                messages.push(Message::new(Role::Assistant, format!("Knowledge: {}", ex.knowledge)));
            }
            messages.push(Message::new(Role::User, question_block(&q.stem, &q.options)));
        }
    }
    Ok(messages)
}

/// Strips the `Knowledge:` prefix a model may echo back from the template.
pub fn clean_knowledge(raw: &str) -> &str {
    let t = raw.trim();
    match t.strip_prefix("Knowledge:") {
        Some(rest) => rest.trim(),
        None => t,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptError {
    MissingKnowledge,
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::MissingKnowledge => f.write_str("knowledge_answer prompt requires knowledge"),
        }
    }
}

impl core::error::Error for PromptError {}
