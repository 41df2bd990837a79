//! Scorer backends: the remote `/score` service and the built-in doubles.

use std::time::Duration;

use linked_core::prep::question_text;
use linked_core::{ConstantScorer, KnowledgeRecord, KnowledgeScorer, OracleScorer, Question, ScoreError};
use serde::{Deserialize, Serialize};

#[derive(Serialize)]
struct Pair<'a> {
    question: &'a str,
    knowledge: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<Pair<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

/// Client for a scorer service exposing `POST /score` and `GET /healthz`.
pub struct RemoteScorer {
    client: reqwest::blocking::Client,
    endpoint: String,
}

impl RemoteScorer {
    pub fn new(endpoint: &str) -> Result<Self, ScoreError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ScoreError::Backend(e.to_string()))?;
        Ok(RemoteScorer { client, endpoint: endpoint.trim_end_matches('/').to_string() })
    }

    pub fn health(&self) -> Result<(), ScoreError> {
        let resp = self
            .client
            .get(format!("{}/healthz", self.endpoint))
            .send()
            .map_err(|e| ScoreError::Unreachable(e.to_string()))?;
        if resp.status().as_u16() == 200 {
            Ok(())
        } else {
            Err(ScoreError::Unreachable(format!("healthz returned {}", resp.status())))
        }
    }
}

impl KnowledgeScorer for RemoteScorer {
    fn score(&self, q: &Question, records: &[KnowledgeRecord]) -> Result<Vec<f64>, ScoreError> {
        let text = question_text(q);
        let body =
            ScoreRequest { pairs: records.iter().map(|r| Pair { question: &text, knowledge: &r.text }).collect() };
        let resp = self
            .client
            .post(format!("{}/score", self.endpoint))
            .json(&body)
            .send()
            .map_err(|e| ScoreError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let raw = resp.text().map_err(|e| ScoreError::Unreachable(e.to_string()))?;
        if !status.is_success() {
            return Err(ScoreError::Backend(format!("HTTP {status}: {raw}")));
        }
        let parsed: ScoreResponse =
            serde_json::from_str(&raw).map_err(|e| ScoreError::Backend(format!("malformed response: {e}")))?;
        if parsed.scores.len() != records.len() {
            return Err(ScoreError::LengthMismatch { expected: records.len(), got: parsed.scores.len() });
        }
        Ok(parsed.scores)
    }
}

/// Which scorer a run uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerChoice {
    Oracle,
    Constant(f64),
    Remote(String),
}

impl ScorerChoice {
    pub fn build(&self) -> Result<Box<dyn KnowledgeScorer>, ScoreError> {
        Ok(match self {
            ScorerChoice::Oracle => Box::new(OracleScorer),
            ScorerChoice::Constant(v) => Box::new(ConstantScorer(*v)),
            ScorerChoice::Remote(url) => {
                let s = RemoteScorer::new(url)?;
                s.health()?;
                Box::new(s)
            }
        })
    }
}
