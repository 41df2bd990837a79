//! Run configuration files and backend construction.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use linked_core::{MockWorldSpec, Question, RunConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::ResponseCache;
use crate::error::{Error, Result};
use crate::gateway::{ChatBackend, Gateway, HttpBackend, MockBackend, RetryPolicy};

/// `RunConfig` plus the settings only the std side needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    /// Model id sent to the chat backend.
    pub model: String,
    /// World for the offline backend, used when `llm_endpoint` is `mock`.
    pub mock_world: Option<MockWorldSpec>,
    pub max_retries: u32,
    pub val_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            run: RunConfig::default(),
            model: "gpt-3.5-turbo-0613".into(),
            mock_world: None,
            max_retries: 4,
            val_fraction: 0.1,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Setup(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Setup(format!("{}: {e}", path.display())))
    }

    pub fn is_mock(&self) -> bool {
        let e = self.run.llm_endpoint.trim();
        e == "mock" || e.starts_with("mock:")
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if let Some(w) = &self.mock_world {
            w.validate().map_err(|e| Error::Setup(e.to_string()))?;
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Setup("val_fraction must lie in (0, 1)".into()));
        }
        if self.max_retries < 1 {
            return Err(Error::Setup("max_retries must be at least 1".into()));
        }
        Ok(())
    }

    /// Hash of everything that can change stage outputs. Cache location and
    /// concurrency are excluded.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.run.cache_dir = String::new();
        c.run.concurrency_limit = 1;
        c.max_retries = 1;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        let d = self.run.cache_dir.trim();
        (!d.is_empty()).then(|| PathBuf::from(d))
    }

    /// Builds the chat gateway. The mock backend needs the questions it will
    /// be asked about.
    pub fn gateway(&self, questions: &[Question]) -> Result<Gateway> {
        self.validate()?;
        let backend: Arc<dyn ChatBackend> = if self.is_mock() {
            Arc::new(MockBackend::new(self.mock_world.clone().unwrap_or_default(), questions))
        } else {
            let retry = RetryPolicy { max_attempts: self.max_retries, ..RetryPolicy::default() };
            Arc::new(
                HttpBackend::new(&self.run.llm_endpoint, &self.model, HttpBackend::api_key_from_env(), retry)
                    .map_err(|e| Error::Setup(e.to_string()))?,
            )
        };
        let cache = match self.cache_dir() {
            Some(dir) => Some(ResponseCache::open(dir).map_err(|e| Error::Setup(e.to_string()))?),
            None => None,
        };
        Ok(Gateway::new(backend, cache, self.run.concurrency_limit as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"top_k": 1, "llm_endpoint": "mock"}"#).unwrap();
        assert_eq!(c.run.top_k, 1);
        assert_eq!(c.run.knowledge_samples, 5);
        assert_eq!(c.run.answer_temperature, 0.7);
        assert!(c.is_mock());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn fingerprint_ignores_cache_and_concurrency() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.run.cache_dir = "elsewhere".into();
        b.run.concurrency_limit = 32;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.run.seed = 3;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn invalid_world_rejected() {
        let c = PipelineConfig {
            mock_world: Some(MockWorldSpec { p0: 2.0, ..MockWorldSpec::default() }),
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
