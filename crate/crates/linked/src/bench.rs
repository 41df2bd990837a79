//! Offline benchmark: a synthetic dataset answered by the mock world.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use linked_core::{accuracy, MockWorldSpec, OracleScorer, Question, ReasoningOutcome, RunConfig, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::gateway::{Gateway, LedgerSnapshot};
use crate::pool::build_pool;
use crate::reasoner::{run_all, score_pool};

/// `n` questions with `n_options` options each and a seeded gold index.
pub fn synthetic_questions(n: usize, n_options: usize, seed: u64, tag: &str) -> Vec<Question> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Question {
            id: format!("{tag}-{i:05}"),
            stem: format!("Synthetic question {i}: which option is right?"),
            options: (0..n_options).map(|j| format!("choice {}", (b'a' + j as u8) as char)).collect(),
            gold: rng.random_range(0..n_options),
            dataset_tag: tag.to_string(),
        })
        .collect()
}

/// Config for an in-memory mock run with no response cache.
pub fn mock_config(world: MockWorldSpec, run: RunConfig) -> PipelineConfig {
    PipelineConfig {
        run: RunConfig { llm_endpoint: "mock".into(), cache_dir: String::new(), ..run },
        mock_world: Some(world),
        ..PipelineConfig::default()
    }
}

pub struct StrategyRun {
    pub outcomes: Vec<ReasoningOutcome>,
    pub accuracy: f64,
    /// Gateway spend while this strategy ran.
    pub ledger: LedgerSnapshot,
}

pub struct Scenario {
    pub pool_ledger: LedgerSnapshot,
    pub pool_size: usize,
    pub runs: BTreeMap<Strategy, StrategyRun>,
    pub elapsed: Duration,
}

/// Builds and levels a pool, scores it with the oracle, and runs each
/// strategy over `questions`.
pub fn run_scenario(cfg: &PipelineConfig, questions: &[Question], strategies: &[Strategy]) -> Result<Scenario> {
    if !cfg.is_mock() {
        return Err(Error::Setup("the bench scenario runs against the mock backend only".into()));
    }
    let started = Instant::now();
    let gw: Gateway = cfg.gateway(questions)?;
    let before = gw.ledger();
    let pool = build_pool(questions, &cfg.run, &gw)?;
    let pool_ledger = gw.ledger().since(&before);
    let scored = score_pool(questions, &pool.records, &OracleScorer)?;
    let mut runs = BTreeMap::new();
    for &st in strategies {
        let before = gw.ledger();
        let outcomes = run_all(questions, Some(&scored), &cfg.run, &gw, st)?;
        let ledger = gw.ledger().since(&before);
        let accuracy = accuracy(&outcomes)?;
        runs.insert(st, StrategyRun { outcomes, accuracy, ledger });
    }
    Ok(Scenario { pool_ledger, pool_size: pool.records.len(), runs, elapsed: started.elapsed() })
}

/// World for the quantitative checks: direct answers right 40% of the time,
/// 90% with good knowledge, 20% with bad.
pub fn reference_world(positive_rate: f64, seed: u64) -> MockWorldSpec {
    MockWorldSpec { p0: 0.4, p_pos: 0.9, p_neg: 0.2, positive_rate, seed }
}

/// MCR alone when all knowledge is good, then MCR against
/// self-consistency when half of it misleads. Two-option questions, top_k 1,
/// three answers.
pub fn reference_scenarios(questions: usize, seed: u64) -> Result<Vec<(f64, Scenario)>> {
    let run = RunConfig { top_k: 1, answer_samples: 3, seed, ..RunConfig::default() };
    let mut out = Vec::new();
    for (rate, strategies) in [(1.0, &[Strategy::Mcr][..]), (0.5, &[Strategy::CotSc, Strategy::Mcr][..])] {
        let qs = synthetic_questions(questions, 2, seed, "synthetic");
        out.push((rate, run_scenario(&mock_config(reference_world(rate, seed), run.clone()), &qs, strategies)?));
    }
    Ok(out)
}
