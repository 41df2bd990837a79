//! Deterministic stand-in for an LLM backend.
//!
//! Knowledge emitted by the mock carries a planted polarity marker. Answer
//! requests are correct with probability `p0` when no marker is present in
//! the final user turn, and otherwise with the mean of `p_pos` / `p_neg`
//! over the markers found there. A wrong answer is a uniformly drawn
//! non-gold option. Every draw is a pure function of the world seed and the
//! request content, so identical requests always get identical completions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chat::{ChatRequest, ChatResponse, Completion, PromptTag};
use crate::hash::Fnv64;
use crate::model::Question;

pub const POSITIVE_MARKER: &str = "[planted:+]";
pub const NEGATIVE_MARKER: &str = "[planted:-]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockWorldSpec {
    /// Correctness probability of a direct answer.
    pub p0: f64,
    /// Correctness probability given positive planted knowledge.
    pub p_pos: f64,
    /// Correctness probability given negative planted knowledge.
    pub p_neg: f64,
    /// Probability that generated knowledge is planted positive.
    pub positive_rate: f64,
    pub seed: u64,
}

impl Default for MockWorldSpec {
    fn default() -> Self {
        MockWorldSpec { p0: 0.4, p_pos: 0.9, p_neg: 0.2, positive_rate: 0.5, seed: 0 }
    }
}

impl MockWorldSpec {
    pub fn validate(&self) -> Result<(), InvalidWorld> {
        for (name, p) in
            [("p0", self.p0), ("p_pos", self.p_pos), ("p_neg", self.p_neg), ("positive_rate", self.positive_rate)]
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(InvalidWorld(name));
            }
        }
        Ok(())
    }

    /// Correctness probability for an answer prompt whose final user turn is
    /// `content`.
    pub fn correctness_probability(&self, tag: PromptTag, content: &str) -> f64 {
        if tag == PromptTag::DirectAnswer {
            return self.p0;
        }
        let pos = content.matches(POSITIVE_MARKER).count();
        let neg = content.matches(NEGATIVE_MARKER).count();
        if pos + neg == 0 {
            self.p0
        } else {
            (pos as f64 * self.p_pos + neg as f64 * self.p_neg) / (pos + neg) as f64
        }
    }

    fn rng_for(&self, req: &ChatRequest, q: &Question, sample_index: u32) -> ChaCha8Rng {
        let mut h = Fnv64::new();
        h.write_u64(self.seed);
        h.write_field(q.id.as_bytes());
        h.write_field(req.tag.as_str().as_bytes());
        h.write_u64(u64::from(req.round));
        h.write_u64(req.seed);
        h.write_u64(u64::from(sample_index));
        h.write_u64(req.temperature.to_bits());
        for m in &req.messages {
            h.write_field(m.content.as_bytes());
        }
        ChaCha8Rng::seed_from_u64(h.finish())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidWorld(pub &'static str);

impl fmt::Display for InvalidWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mock world probability {} must lie in [0, 1]", self.0)
    }
}

impl core::error::Error for InvalidWorld {}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// Produces the completion for one sample index of `req`.
pub fn mock_sample(req: &ChatRequest, world: &MockWorldSpec, q: &Question, sample_index: u32) -> Completion {
    let mut rng = world.rng_for(req, q, sample_index);
    let text = match req.tag {
        PromptTag::KnowledgeGen => {
            let positive = rng.random_bool(world.positive_rate);
            let marker = if positive { POSITIVE_MARKER } else { NEGATIVE_MARKER };
            format!("Knowledge: Observation {} (round {}) about question {} {}", sample_index, req.round, q.id, marker)
        }
        PromptTag::DirectAnswer | PromptTag::KnowledgeAnswer => {
            let content = req.last_user_content().unwrap_or("");
            let p = world.correctness_probability(req.tag, content);
            let choice = if rng.random_bool(p) {
                q.gold
            } else {
                let wrong = rng.random_range(0..q.options.len() - 1);
                if wrong >= q.gold {
                    wrong + 1
                } else {
                    wrong
                }
            };
            format!("Answer: ({})", choice + 1)
        }
    };
    let tokens_in = req.messages.iter().map(|m| word_count(&m.content)).sum();
    let tokens_out = word_count(&text);
    Completion { text, tokens_in, tokens_out }
}

/// All `n_samples` completions of `req`, in sample order.
pub fn mock_complete(req: &ChatRequest, world: &MockWorldSpec, q: &Question) -> ChatResponse {
    let items: Vec<Completion> = (0..req.n_samples).map(|i| mock_sample(req, world, q, i)).collect();
    ChatResponse::from_completions(items, false)
}

/// Planted polarity of a mock knowledge string, if it carries one.
pub fn planted_polarity(text: &str) -> Option<bool> {
    if text.contains(POSITIVE_MARKER) {
        Some(true)
    } else if text.contains(NEGATIVE_MARKER) {
        Some(false)
    } else {
        None
    }
}

/// Strips planted markers. Useful when displaying mock knowledge.
pub fn strip_markers(text: &str) -> String {
    text.replace(POSITIVE_MARKER, "").replace(NEGATIVE_MARKER, "").trim_end().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_answer;
    use crate::prompt::render_prompt;
    use alloc::vec;

    fn question() -> Question {
        Question {
            id: "q7".into(),
            stem: "Pick one.".into(),
            options: vec!["alpha".into(), "beta".into(), "gamma".into()],
            gold: 2,
            dataset_tag: "mock".into(),
        }
    }

    fn direct(q: &Question, n: u32) -> ChatRequest {
        ChatRequest::new(render_prompt(q, PromptTag::DirectAnswer, None).unwrap(), PromptTag::DirectAnswer, 0.7, n)
            .for_question(&q.id)
    }

    #[test]
    fn certain_world_always_gold() {
        let q = question();
        let world = MockWorldSpec { p0: 1.0, ..MockWorldSpec::default() };
        let resp = mock_complete(&direct(&q, 50), &world, &q);
        assert_eq!(resp.completions.len(), 50);
        for c in &resp.completions {
            assert_eq!(parse_answer(c, &q.options), Some(2));
        }
    }

    #[test]
    fn impossible_world_never_gold() {
        let q = question();
        let world = MockWorldSpec { p0: 0.0, ..MockWorldSpec::default() };
        let resp = mock_complete(&direct(&q, 200), &world, &q);
        let mut seen = [0usize; 3];
        for c in &resp.completions {
            seen[parse_answer(c, &q.options).unwrap()] += 1;
        }
        assert_eq!(seen[2], 0);
        assert!(seen[0] > 0 && seen[1] > 0);
    }

    #[test]
    fn deterministic_under_seed() {
        let q = question();
        let world = MockWorldSpec::default();
        let a = mock_complete(&direct(&q, 20), &world, &q);
        let b = mock_complete(&direct(&q, 20), &world, &q);
        assert_eq!(a, b);
        let other = MockWorldSpec { seed: 1, ..world };
        assert_ne!(a.completions, mock_complete(&direct(&q, 20), &other, &q).completions);
    }

    #[test]
    fn rounds_are_independent_draws() {
        let q = question();
        let world = MockWorldSpec::default();
        let a = mock_complete(&direct(&q, 20), &world, &q);
        let b = mock_complete(&direct(&q, 20).in_round(1), &world, &q);
        assert_ne!(a.completions, b.completions);
    }

    #[test]
    fn knowledge_probability_is_marker_mean() {
        let w = MockWorldSpec { p0: 0.4, p_pos: 0.9, p_neg: 0.2, ..MockWorldSpec::default() };
        let both = format!("{POSITIVE_MARKER}\n{NEGATIVE_MARKER}");
        assert!((w.correctness_probability(PromptTag::KnowledgeAnswer, &both) - 0.55).abs() < 1e-12);
        assert_eq!(w.correctness_probability(PromptTag::KnowledgeAnswer, "plain"), 0.4);
        assert_eq!(w.correctness_probability(PromptTag::DirectAnswer, POSITIVE_MARKER), 0.4);
    }

    #[test]
    fn knowledge_carries_marker_and_no_gold() {
        let q = question();
        let req = ChatRequest::new(
            render_prompt(&q, PromptTag::KnowledgeGen, None).unwrap(),
            PromptTag::KnowledgeGen,
            1.3,
            5,
        );
        let resp = mock_complete(&req, &MockWorldSpec::default(), &q);
        assert_eq!(resp.completions.len(), 5);
        for c in &resp.completions {
            assert!(planted_polarity(c).is_some());
            assert!(!c.contains("gamma"));
        }
        assert!(resp.tokens_in > 0 && resp.tokens_out > 0);
    }

    #[test]
    fn world_validation() {
        assert!(MockWorldSpec::default().validate().is_ok());
        let bad = MockWorldSpec { p_neg: 1.5, ..MockWorldSpec::default() };
        assert_eq!(bad.validate(), Err(InvalidWorld("p_neg")));
    }

    #[test]
    fn strip_markers_removes_polarity() {
        let s = strip_markers("fact [planted:+]");
        assert_eq!(s, "fact");
        assert_eq!(planted_polarity(&s), None);
    }
}
