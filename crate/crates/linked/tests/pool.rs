mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use common::question;
use linked::gateway::{ChatBackend, Gateway, MockBackend};
use linked::pool::{build_pool, elicit_knowledge, elicit_pool, label_pool, rounds};
use linked::{Error, GatewayError};
use linked_core::{ChatRequest, Completion, Condition, Level, MockWorldSpec, PromptTag, Question, RunConfig};

/// Wraps the mock and records the tag and sample count of every call.
struct Counting {
    inner: MockBackend,
    calls: Mutex<Vec<(PromptTag, usize)>>,
}

impl ChatBackend for Counting {
    fn model_id(&self) -> &str {
        "counting"
    }

    fn sample(&self, req: &ChatRequest, indices: &[u32]) -> Result<Vec<Completion>, GatewayError> {
        self.calls.lock().unwrap().push((req.tag, indices.len()));
        self.inner.sample(req, indices)
    }
}

/// Knowledge generation returns blanks for `blank(round, index)`.
struct Blanking<F> {
    inner: MockBackend,
    blank: F,
    regenerations: AtomicUsize,
}

impl<F: Fn(u32, u32) -> bool + Send + Sync> ChatBackend for Blanking<F> {
    fn model_id(&self) -> &str {
        "blanking"
    }

    fn sample(&self, req: &ChatRequest, indices: &[u32]) -> Result<Vec<Completion>, GatewayError> {
        let mut out = self.inner.sample(req, indices)?;
        if req.tag == PromptTag::KnowledgeGen {
            if req.round == rounds::REGENERATE {
                self.regenerations.fetch_add(indices.len(), Ordering::SeqCst);
            }
            for (c, &i) in out.iter_mut().zip(indices) {
                if (self.blank)(req.round, i) {
                    c.text = "  ".into();
                }
            }
        }
        Ok(out)
    }
}

fn cfg() -> RunConfig {
    RunConfig { llm_endpoint: "mock".into(), cache_dir: String::new(), concurrency_limit: 4, ..RunConfig::default() }
}

fn world(p0: f64, p_pos: f64, p_neg: f64, positive_rate: f64) -> MockWorldSpec {
    MockWorldSpec { p0, p_pos, p_neg, positive_rate, seed: 11 }
}

fn gateway(backend: impl ChatBackend + 'static) -> Gateway {
    Gateway::new(Arc::new(backend), None, 4)
}

#[test]
fn one_question_makes_one_generation_and_six_answer_calls() {
    let qs = vec![question("q1", 1)];
    let backend =
        Arc::new(Counting { inner: MockBackend::new(MockWorldSpec::default(), &qs), calls: Mutex::new(Vec::new()) });
    let gw = Gateway::new(backend.clone(), None, 4);
    let out = build_pool(&qs, &cfg(), &gw).unwrap();
    assert_eq!(out.records.len(), 5);
    assert_eq!(out.samples.len(), 6);
    assert_eq!(out.samples[0].condition, Condition::Direct);
    assert!(out.samples[1..].iter().all(|s| s.condition == Condition::WithKnowledge));

    let calls = backend.calls.lock().unwrap().clone();
    let gens: Vec<_> = calls.iter().filter(|(t, _)| *t == PromptTag::KnowledgeGen).collect();
    assert_eq!(gens, [&(PromptTag::KnowledgeGen, 5)]);
    assert_eq!(calls.iter().filter(|(t, _)| *t == PromptTag::DirectAnswer).count(), 1);
    assert_eq!(calls.iter().filter(|(t, _)| *t == PromptTag::KnowledgeAnswer).count(), 5);
    assert!(calls.iter().all(|&(t, n)| t == PromptTag::KnowledgeGen || n == 1));
    assert_eq!(gw.ledger().backend_calls, 7);
}

#[test]
fn records_carry_ids_and_generation_settings() {
    let qs = vec![question("q1", 0)];
    let gw = gateway(MockBackend::new(MockWorldSpec::default(), &qs));
    let records = elicit_knowledge(&qs[0], &cfg(), &gw).unwrap();
    let kids: Vec<&str> = records.iter().map(|r| r.kid.as_str()).collect();
    assert_eq!(kids, ["q1-k000", "q1-k001", "q1-k002", "q1-k003", "q1-k004"]);
    for r in &records {
        assert_eq!(r.gen_temperature, 1.3);
        assert!(r.level.is_none() && r.label.is_none() && r.score.is_none());
        assert!(!r.text.starts_with("Knowledge:"), "{}", r.text);
    }
}

#[test]
fn helpful_world_levels_everything_zero() {
    let qs: Vec<Question> = (0..10).map(|i| question(&format!("q{i}"), i % 3)).collect();
    let gw = gateway(MockBackend::new(world(0.0, 1.0, 0.0, 1.0), &qs));
    let out = build_pool(&qs, &cfg(), &gw).unwrap();
    assert_eq!(out.records.len(), 50);
    assert!(out.records.iter().all(|r| r.level == Some(Level::Useful)));
    assert!(out.records.iter().all(|r| r.label.is_some_and(|l| l.is_positive())));
}

#[test]
fn harmful_world_levels_everything_three() {
    let qs: Vec<Question> = (0..10).map(|i| question(&format!("q{i}"), i % 3)).collect();
    let gw = gateway(MockBackend::new(world(1.0, 1.0, 0.0, 0.0), &qs));
    let out = build_pool(&qs, &cfg(), &gw).unwrap();
    assert!(out.records.iter().all(|r| r.level == Some(Level::Harmful)));
    assert!(out.records.iter().all(|r| r.label.is_some_and(|l| !l.is_positive())));
}

#[test]
fn blank_knowledge_is_regenerated_once() {
    let qs = vec![question("q1", 0)];
    let backend = Blanking {
        inner: MockBackend::new(MockWorldSpec::default(), &qs),
        blank: |round, i| round == rounds::POOL && (i == 1 || i == 3),
        regenerations: AtomicUsize::new(0),
    };
    let gw = gateway(backend);
    let records = elicit_knowledge(&qs[0], &cfg(), &gw).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records[1].text.contains("(round 1)"));
    assert!(records[0].text.contains("(round 0)"));
}

#[test]
fn still_blank_after_regeneration_is_dropped() {
    let qs = vec![question("q1", 0)];
    let gw = gateway(Blanking {
        inner: MockBackend::new(MockWorldSpec::default(), &qs),
        blank: |_, i| i == 2,
        regenerations: AtomicUsize::new(0),
    });
    let records = elicit_knowledge(&qs[0], &cfg(), &gw).unwrap();
    let idx: Vec<u32> = records.iter().map(|r| r.sample_index).collect();
    assert_eq!(idx, [0, 1, 3, 4]);
}

#[test]
fn elicitation_failure_skips_the_question() {
    let qs = vec![question("bad", 0), question("good", 1)];
    let gw = gateway(Blanking {
        inner: MockBackend::new(MockWorldSpec::default(), &qs),
        blank: |_, _| true,
        regenerations: AtomicUsize::new(0),
    });
    let err = elicit_knowledge(&qs[0], &cfg(), &gw).unwrap_err();
    assert!(matches!(err, Error::ElicitationFailure { ref qid } if qid == "bad"), "{err}");

    let gw = gateway(Blanking {
        inner: MockBackend::new(MockWorldSpec::default(), &qs),
        blank: |_, _| false,
        regenerations: AtomicUsize::new(0),
    });
    let (records, failures) = elicit_pool(&qs, &cfg(), &gw).unwrap();
    assert!(failures.is_empty());
    assert_eq!(records.len(), 10);

    struct OnlyGood(MockBackend);
    impl ChatBackend for OnlyGood {
        fn model_id(&self) -> &str {
            "only-good"
        }
        fn sample(&self, req: &ChatRequest, indices: &[u32]) -> Result<Vec<Completion>, GatewayError> {
            let mut out = self.0.sample(req, indices)?;
            if req.qid.as_deref() == Some("bad") && req.tag == PromptTag::KnowledgeGen {
                out.iter_mut().for_each(|c| c.text.clear());
            }
            Ok(out)
        }
    }
    let gw = gateway(OnlyGood(MockBackend::new(MockWorldSpec::default(), &qs)));
    let out = build_pool(&qs, &cfg(), &gw).unwrap();
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].qid, "bad");
    assert!(out.records.iter().all(|r| r.qid == "good"));
}

#[test]
fn label_pool_matches_build_pool_and_rejects_foreign_records() {
    let qs: Vec<Question> = (0..6).map(|i| question(&format!("q{i}"), i % 3)).collect();
    let built = build_pool(&qs, &cfg(), &gateway(MockBackend::new(MockWorldSpec::default(), &qs))).unwrap();

    let gw = gateway(MockBackend::new(MockWorldSpec::default(), &qs));
    let (mut pool, _) = elicit_pool(&qs, &cfg(), &gw).unwrap();
    pool.reverse();
    let labeled = label_pool(&qs, &pool, &cfg(), &gw).unwrap();
    let mut expected = built.records.clone();
    expected.sort_by(|a, b| a.qid.cmp(&b.qid).then(b.kid.cmp(&a.kid)));
    let mut got = labeled.records.clone();
    got.sort_by(|a, b| a.qid.cmp(&b.qid).then(b.kid.cmp(&a.kid)));
    assert_eq!(got, expected);

    let mut stray = pool.clone();
    stray[0].qid = "elsewhere".into();
    assert!(matches!(label_pool(&qs, &stray, &cfg(), &gw), Err(Error::Stage { .. })));
}

#[test]
fn empty_question_list_is_rejected() {
    let gw = gateway(MockBackend::new(MockWorldSpec::default(), &[]));
    assert!(build_pool(&[], &cfg(), &gw).is_err());
}
