//! Chat-completion gateway: backend dispatch, caching, concurrency limiting
//! and token accounting.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use linked_core::{mock_sample, ChatRequest, ChatResponse, Completion, MockWorldSpec, Question};
use serde_json::{json, Value};

use crate::cache::ResponseCache;
use crate::error::GatewayError;

/// Something that produces completions for chosen sample indices.
pub trait ChatBackend: Send + Sync {
    fn model_id(&self) -> &str;

    /// One completion per entry of `indices`, in the same order.
    fn sample(&self, req: &ChatRequest, indices: &[u32]) -> Result<Vec<Completion>, GatewayError>;
}

/// Offline backend driven by a [`MockWorldSpec`].
pub struct MockBackend {
    world: MockWorldSpec,
    questions: HashMap<String, Question>,
}

impl MockBackend {
    pub fn new(world: MockWorldSpec, questions: &[Question]) -> Self {
        MockBackend { world, questions: questions.iter().map(|q| (q.id.clone(), q.clone())).collect() }
    }
}

impl ChatBackend for MockBackend {
    fn model_id(&self) -> &str {
        "mock"
    }

    fn sample(&self, req: &ChatRequest, indices: &[u32]) -> Result<Vec<Completion>, GatewayError> {
        let qid = req.qid.as_deref().unwrap_or("");
        let q = self.questions.get(qid).ok_or_else(|| GatewayError::UnknownQuestion(qid.into()))?;
        Ok(indices.iter().map(|&i| mock_sample(req, &self.world, q, i)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 4, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(20) }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.saturating_sub(1).min(16);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
    retry: RetryPolicy,
    multi_sample: AtomicBool,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, retry: RetryPolicy) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Network { attempts: 0, message: e.to_string() })?;
        Ok(HttpBackend {
            client,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key,
            model: model.into(),
            retry,
            multi_sample: AtomicBool::new(true),
        })
    }

    /// Reads the key from `LINKED_API_KEY`, falling back to `OPENAI_API_KEY`.
    pub fn api_key_from_env() -> Option<String> {
        std::env::var("LINKED_API_KEY").or_else(|_| std::env::var("OPENAI_API_KEY")).ok().filter(|k| !k.is_empty())
    }

    fn post(&self, req: &ChatRequest, n: usize) -> Result<Value, GatewayError> {
        let body = json!({
            "model": self.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "n": n,
            "max_tokens": req.max_tokens,
        });
        let url = format!("{}/chat/completions", self.endpoint);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut builder = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                builder = builder.bearer_auth(key);
            }
            let retryable = match builder.send() {
                Err(e) => GatewayError::Network { attempts: attempt, message: e.to_string() },
                Ok(resp) => {
                    let status = resp.status();
                    let text =
                        resp.text().map_err(|e| GatewayError::Network { attempts: attempt, message: e.to_string() })?;
                    if status.is_success() {
                        return serde_json::from_str(&text)
                            .map_err(|e| GatewayError::Malformed(format!("{e}: {}", truncate(&text))));
                    }
                    if status.as_u16() == 429 {
                        GatewayError::RateLimited { attempts: attempt }
                    } else if status.is_server_error() {
                        GatewayError::Status { status: status.as_u16(), body: truncate(&text) }
                    } else {
                        return Err(GatewayError::Status { status: status.as_u16(), body: truncate(&text) });
                    }
                }
            };
            if attempt >= self.retry.max_attempts {
                return Err(retryable);
            }
            std::thread::sleep(self.retry.delay(attempt));
        }
    }

    fn single(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let value = self.post(req, 1)?;
        let mut items = parse_completions(&value)?;
        Ok(items.swap_remove(0))
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

/// Extracts `choices[*].message.content` ordered by choice index. The
/// request's usage is attributed to the first completion.
pub fn parse_completions(value: &Value) -> Result<Vec<Completion>, GatewayError> {
    let choices = value
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| GatewayError::Malformed("missing choices array".into()))?;
    if choices.is_empty() {
        return Err(GatewayError::Malformed("empty choices array".into()));
    }
    let mut indexed = Vec::with_capacity(choices.len());
    for (pos, c) in choices.iter().enumerate() {
        let content = c
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Malformed(format!("choice {pos} has no message content")))?;
        let index = c.get("index").and_then(Value::as_u64).unwrap_or(pos as u64);
        indexed.push((index, content.to_string()));
    }
    indexed.sort_by_key(|(i, _)| *i);
    let usage = value.get("usage");
    let read = |k: &str| usage.and_then(|u| u.get(k)).and_then(Value::as_u64).unwrap_or(0);
    let (tokens_in, tokens_out) = (read("prompt_tokens"), read("completion_tokens"));
    Ok(indexed
        .into_iter()
        .enumerate()
        .map(|(i, (_, text))| Completion {
            text,
            tokens_in: if i == 0 { tokens_in } else { 0 },
            tokens_out: if i == 0 { tokens_out } else { 0 },
        })
        .collect())
}

impl ChatBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn sample(&self, req: &ChatRequest, indices: &[u32]) -> Result<Vec<Completion>, GatewayError> {
        let n = indices.len();
        if n > 1 && self.multi_sample.load(Ordering::Relaxed) {
            match self.post(req, n) {
                Ok(value) => {
                    let mut items = parse_completions(&value)?;
                    items.truncate(n);
                    if items.len() == n {
                        return Ok(items);
                    }
                    // Short response: fill the remainder one at a time.
                    while items.len() < n {
                        items.push(self.single(req)?);
                    }
                    return Ok(items);
                }
                Err(GatewayError::Status { status: 400, .. }) => {
                    self.multi_sample.store(false, Ordering::Relaxed);
                }
                Err(e) => return Err(e),
            }
        }
        if n == 1 {
            return Ok(vec![self.single(req)?]);
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..n).map(|_| s.spawn(|| self.single(req))).collect();
            handles.into_iter().map(|h| h.join().expect("request thread panicked")).collect()
        })
    }
}

/// Counting semaphore bounding in-flight backend calls.
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter { available: Mutex::new(n.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut guard = self.available.lock().unwrap();
        while *guard == 0 {
            guard = self.freed.wait(guard).unwrap();
        }
        *guard -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

/// Usage billed by non-cached backend calls.
#[derive(Debug, Default)]
pub struct TokenLedger {
    tokens_in: AtomicU64,
    tokens_out: AtomicU64,
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct LedgerSnapshot {
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub backend_calls: u64,
    pub cache_hits: u64,
}

impl LedgerSnapshot {
    pub fn tokens(&self) -> u64 {
        self.tokens_in + self.tokens_out
    }

    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            tokens_in: self.tokens_in - earlier.tokens_in,
            tokens_out: self.tokens_out - earlier.tokens_out,
            backend_calls: self.backend_calls - earlier.backend_calls,
            cache_hits: self.cache_hits - earlier.cache_hits,
        }
    }
}

impl TokenLedger {
    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            tokens_in: self.tokens_in.load(Ordering::SeqCst),
            tokens_out: self.tokens_out.load(Ordering::SeqCst),
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }
}

pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    cache: Option<ResponseCache>,
    ledger: TokenLedger,
    limiter: Limiter,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, cache: Option<ResponseCache>, concurrency_limit: usize) -> Self {
        Gateway { backend, cache, ledger: TokenLedger::default(), limiter: Limiter::new(concurrency_limit) }
    }

    pub fn ledger(&self) -> LedgerSnapshot {
        self.ledger.snapshot()
    }

    pub fn model_id(&self) -> &str {
        self.backend.model_id()
    }

    /// `n_samples` completions ordered by sample index. Cached samples are
    /// replayed with their original usage; only backend calls reach the
    /// ledger.
    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let indices: Vec<u32> = (0..req.n_samples).collect();
        self.complete_indices(req, &indices)
    }

    /// Completions for the given sample indices of `req`, in that order.
    pub fn complete_indices(&self, req: &ChatRequest, indices: &[u32]) -> Result<ChatResponse, GatewayError> {
        let (items, cached) = self.fetch(req, indices)?;
        Ok(ChatResponse::from_completions(items, cached))
    }

    /// Like [`Gateway::complete_indices`], keeping each sample's own usage.
    pub fn complete_indices_per_sample(
        &self,
        req: &ChatRequest,
        indices: &[u32],
    ) -> Result<Vec<Completion>, GatewayError> {
        self.fetch(req, indices).map(|(items, _)| items)
    }

    fn fetch(&self, req: &ChatRequest, indices: &[u32]) -> Result<(Vec<Completion>, bool), GatewayError> {
        if !req.is_valid() || indices.is_empty() {
            return Err(GatewayError::InvalidRequest(
                "messages must be non-empty, start with system or user, and n_samples >= 1".into(),
            ));
        }
        let model = self.backend.model_id();
        let keys: Vec<String> = match &self.cache {
            Some(_) => indices.iter().map(|&i| ResponseCache::key(model, req, i)).collect(),
            None => Vec::new(),
        };
        let mut slots: Vec<Option<Completion>> = vec![None; indices.len()];
        if let Some(cache) = &self.cache {
            for (slot, key) in slots.iter_mut().zip(&keys) {
                *slot = cache.get(key);
            }
        }
        let hits = slots.iter().filter(|s| s.is_some()).count();
        self.ledger.cache_hits.fetch_add(hits as u64, Ordering::SeqCst);
        let missing_pos: Vec<usize> = (0..indices.len()).filter(|&p| slots[p].is_none()).collect();

        if !missing_pos.is_empty() {
            let missing: Vec<u32> = missing_pos.iter().map(|&p| indices[p]).collect();
            let fresh = {
                let _permit = self.limiter.acquire();
                self.backend.sample(req, &missing)?
            };
            if fresh.len() != missing.len() {
                return Err(GatewayError::Malformed(format!(
                    "backend returned {} completions for {} samples",
                    fresh.len(),
                    missing.len()
                )));
            }
            self.ledger.backend_calls.fetch_add(1, Ordering::SeqCst);
            for (&pos, item) in missing_pos.iter().zip(fresh) {
                self.ledger.tokens_in.fetch_add(item.tokens_in, Ordering::SeqCst);
                self.ledger.tokens_out.fetch_add(item.tokens_out, Ordering::SeqCst);
                if let Some(cache) = &self.cache {
                    cache.put(&keys[pos], &item)?;
                }
                slots[pos] = Some(item);
            }
        }
        let items: Vec<Completion> = slots.into_iter().map(|s| s.expect("every slot filled")).collect();
        Ok((items, missing_pos.is_empty()))
    }
}
