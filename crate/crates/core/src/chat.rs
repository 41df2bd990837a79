//! Backend-agnostic chat-completion request and response types.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Message { role, content: content.into() }
    }
}

/// Prompt family a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTag {
    KnowledgeGen,
    DirectAnswer,
    KnowledgeAnswer,
}

impl PromptTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptTag::KnowledgeGen => "knowledge_gen",
            PromptTag::DirectAnswer => "direct_answer",
            PromptTag::KnowledgeAnswer => "knowledge_answer",
        }
    }

    pub fn default_max_tokens(self) -> u32 {
        match self {
            PromptTag::KnowledgeGen => 256,
            PromptTag::DirectAnswer | PromptTag::KnowledgeAnswer => 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub n_samples: u32,
    pub max_tokens: u32,
    pub tag: PromptTag,
    /// Question this request is about. Not sent over the wire.
    pub qid: Option<String>,
    /// Independent sampling round. Requests that differ only in `round` are
    /// distinct draws for caching and mock randomness.
    pub round: u32,
    /// Run seed. Distinct seeds are distinct draws.
    pub seed: u64,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>, tag: PromptTag, temperature: f64, n_samples: u32) -> Self {
        ChatRequest {
            messages,
            temperature,
            n_samples,
            max_tokens: tag.default_max_tokens(),
            tag,
            qid: None,
            round: 0,
            seed: 0,
        }
    }

    pub fn for_question(mut self, qid: &str) -> Self {
        self.qid = Some(qid.into());
        self
    }

    pub fn in_round(mut self, round: u32) -> Self {
        self.round = round;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.n_samples >= 1 && matches!(self.messages.first(), Some(Message { role: Role::System | Role::User, .. }))
    }

    /// Content of the final user turn, which carries the question.
    pub fn last_user_content(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }
}

/// One sampled completion and the usage billed for producing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub completions: Vec<String>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub cached: bool,
}

impl ChatResponse {
    pub fn from_completions(items: Vec<Completion>, cached: bool) -> Self {
        let tokens_in = items.iter().map(|c| c.tokens_in).sum();
        let tokens_out = items.iter().map(|c| c.tokens_out).sum();
        ChatResponse { completions: items.into_iter().map(|c| c.text).collect(), tokens_in, tokens_out, cached }
    }

    pub fn tokens(&self) -> u64 {
        self.tokens_in + self.tokens_out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validity_requires_leading_system_or_user() {
        let ok = ChatRequest::new(vec![Message::new(Role::User, "hi")], PromptTag::DirectAnswer, 0.7, 1);
        assert!(ok.is_valid());
        let bad = ChatRequest::new(vec![Message::new(Role::Assistant, "hi")], PromptTag::DirectAnswer, 0.7, 1);
        assert!(!bad.is_valid());
        let empty = ChatRequest::new(vec![], PromptTag::DirectAnswer, 0.7, 1);
        assert!(!empty.is_valid());
        let zero = ChatRequest::new(vec![Message::new(Role::User, "hi")], PromptTag::DirectAnswer, 0.7, 0);
        assert!(!zero.is_valid());
    }

    #[test]
    fn max_token_defaults() {
        assert_eq!(PromptTag::KnowledgeGen.default_max_tokens(), 256);
        assert_eq!(PromptTag::DirectAnswer.default_max_tokens(), 64);
        assert_eq!(PromptTag::KnowledgeAnswer.default_max_tokens(), 64);
    }
}
