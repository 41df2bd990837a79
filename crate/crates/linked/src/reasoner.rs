//! Reasoning strategies over a scored knowledge pool.
//!
//! Marginal consistent reasoning fixes one rationale built from the
//! best-ranked knowledge and votes over several answers conditioned on it.
//! Self-consistency (`cot_sc`) instead samples whole rationale+answer chains
//! and votes over their answers.

use std::collections::HashMap;

use linked_core::prompt::clean_knowledge;
use linked_core::scoring::by_rank;
use linked_core::{
    render_prompt, score_batch, select_rationale, AnswerSample, ChatRequest, KnowledgeRecord, KnowledgeScorer,
    PromptTag, Question, ReasoningOutcome, RunConfig, ScoreError, ScoredKnowledge, Strategy,
};

use crate::error::{Error, GatewayError, Result};
use crate::gateway::Gateway;
use crate::par::ordered_map;
use crate::pool::{answer_draws, rounds};

fn outcome(q: &Question, strategy: Strategy, samples: Vec<AnswerSample>, extra_tokens: u64) -> ReasoningOutcome {
    let tokens: u64 = samples.iter().map(AnswerSample::tokens).sum::<u64>() + extra_tokens;
    ReasoningOutcome::from_samples(&q.id, strategy, samples, q.gold, tokens)
}

/// Marginal consistent reasoning: `cfg.answer_samples` answers conditioned
/// on the top-`cfg.top_k` rationale, majority-voted.
pub fn mcr(q: &Question, scored: &[ScoredKnowledge], cfg: &RunConfig, gw: &Gateway) -> Result<ReasoningOutcome> {
    fixed_rationale(q, scored, cfg, gw, cfg.answer_samples, Strategy::Mcr)
}

fn fixed_rationale(
    q: &Question,
    scored: &[ScoredKnowledge],
    cfg: &RunConfig,
    gw: &Gateway,
    n: u32,
    strategy: Strategy,
) -> Result<ReasoningOutcome> {
    if scored.is_empty() {
        return Err(ScoreError::Empty(q.id.clone()).into());
    }
    let rationale = select_rationale(scored, cfg.top_k as usize);
    let samples = answer_draws(q, Some((&rationale.text, &rationale.kids)), cfg, gw, 0..n, rounds::REASON)?;
    Ok(outcome(q, strategy, samples, 0))
}

/// One answer per rationale slot, rationales taken by ascending rank and
/// recycled when there are fewer pieces than slots.
fn multi_rationale(
    q: &Question,
    scored: &[ScoredKnowledge],
    cfg: &RunConfig,
    gw: &Gateway,
    answers_each: u32,
    strategy: Strategy,
) -> Result<ReasoningOutcome> {
    if scored.is_empty() {
        return Err(ScoreError::Empty(q.id.clone()).into());
    }
    let ranked = by_rank(scored);
    let mut samples = Vec::new();
    for slot in 0..cfg.answer_samples {
        let piece = ranked[slot as usize % ranked.len()];
        let kids = [piece.record.kid.clone()];
        // Distinct sample indices per slot keep recycled rationales
        // independent draws.
        let start = slot * answers_each;
        samples.extend(answer_draws(
            q,
            Some((&piece.record.text, &kids)),
            cfg,
            gw,
            start..start + answers_each,
            rounds::REASON,
        )?);
    }
    Ok(outcome(q, strategy, samples, 0))
}

/// `chains` independent rationale-then-answer chains.
fn chains(q: &Question, cfg: &RunConfig, gw: &Gateway, chains: u32, strategy: Strategy) -> Result<ReasoningOutcome> {
    let gw_err = |source: GatewayError| Error::Gateway { stage: "reason", qid: q.id.clone(), source };
    let messages = render_prompt(q, PromptTag::KnowledgeGen, None).map_err(GatewayError::from).map_err(gw_err)?;
    let req = ChatRequest::new(messages, PromptTag::KnowledgeGen, cfg.answer_temperature, chains)
        .for_question(&q.id)
        .with_seed(cfg.seed)
        .in_round(rounds::REASON);
    let resp = gw.complete(&req).map_err(gw_err)?;
    let mut samples = Vec::with_capacity(chains as usize);
    for (i, raw) in resp.completions.iter().enumerate() {
        let text = clean_knowledge(raw);
        let ids = [format!("{}-r{i:03}", q.id)];
        let i = i as u32;
        samples.extend(answer_draws(q, Some((text, &ids)), cfg, gw, i..i + 1, rounds::REASON)?);
    }
    Ok(outcome(q, strategy, samples, resp.tokens()))
}

/// Runs one strategy on one question. `scored` is required for the
/// pool-based strategies.
pub fn run_strategy(
    q: &Question,
    scored: Option<&[ScoredKnowledge]>,
    cfg: &RunConfig,
    gw: &Gateway,
    strategy: Strategy,
) -> Result<ReasoningOutcome> {
    let pool = || scored.filter(|s| !s.is_empty()).ok_or_else(|| Error::from(ScoreError::Empty(q.id.clone())));
    let n = cfg.answer_samples;
    match strategy {
        Strategy::FewShot => {
            let samples = answer_draws(q, None, cfg, gw, 0..1, rounds::REASON)?;
            Ok(outcome(q, strategy, samples, 0))
        }
        Strategy::Cot => chains(q, cfg, gw, 1, strategy),
        Strategy::CotSc => chains(q, cfg, gw, n, strategy),
        Strategy::Mcr => mcr(q, pool()?, cfg, gw),
        Strategy::Oo => fixed_rationale(q, pool()?, cfg, gw, 1, strategy),
        Strategy::Om => fixed_rationale(q, pool()?, cfg, gw, n, strategy),
        Strategy::Mo => multi_rationale(q, pool()?, cfg, gw, 1, strategy),
        Strategy::Mm => multi_rationale(q, pool()?, cfg, gw, n, strategy),
    }
}

/// Scores every question's knowledge with `scorer`. Questions without
/// knowledge map to an empty list.
pub fn score_pool(
    questions: &[Question],
    pool: &[KnowledgeRecord],
    scorer: &dyn KnowledgeScorer,
) -> Result<HashMap<String, Vec<ScoredKnowledge>>> {
    let mut grouped: HashMap<&str, Vec<KnowledgeRecord>> = HashMap::new();
    for r in pool {
        grouped.entry(r.qid.as_str()).or_default().push(r.clone());
    }
    let mut out = HashMap::new();
    for q in questions {
        let scored = match grouped.get(q.id.as_str()) {
            Some(records) => score_batch(q, records, scorer)?,
            None => Vec::new(),
        };
        out.insert(q.id.clone(), scored);
    }
    Ok(out)
}

/// Runs `strategy` over every question in dataset order. For pool-based
/// strategies, a question with no knowledge yields an all-invalid outcome.
pub fn run_all(
    questions: &[Question],
    scored: Option<&HashMap<String, Vec<ScoredKnowledge>>>,
    cfg: &RunConfig,
    gw: &Gateway,
    strategy: Strategy,
) -> Result<Vec<ReasoningOutcome>> {
    cfg.validate()?;
    if strategy.needs_pool() && scored.is_none() {
        return Err(Error::Setup(format!("strategy {strategy} needs a knowledge pool")));
    }
    let results = ordered_map(questions, cfg.concurrency_limit as usize, |q| {
        let these = scored.and_then(|m| m.get(&q.id)).map(Vec::as_slice);
        if strategy.needs_pool() && these.is_none_or(<[_]>::is_empty) {
            return Ok(ReasoningOutcome::from_samples(&q.id, strategy, Vec::new(), q.gold, 0));
        }
        run_strategy(q, these, cfg, gw, strategy)
    });
    results.into_iter().collect()
}
