//! Knowledge pool construction: elicit knowledge per question, answer with
//! and without each piece, and level every piece.

use std::collections::BTreeMap;

use linked_core::prompt::clean_knowledge;
use linked_core::{
    assign_level, render_prompt, AnswerSample, ChatRequest, KnowledgeRecord, PromptTag, Question, RunConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, GatewayError, Result};
use crate::gateway::Gateway;
use crate::par::ordered_map;

/// Sampling rounds. Requests in different rounds never share cache entries
/// or mock draws.
pub mod rounds {
    pub const POOL: u32 = 0;
    pub const REGENERATE: u32 = 1;
    pub const REASON: u32 = 2;
}

fn gateway_err<'a>(stage: &'static str, qid: &'a str) -> impl FnOnce(GatewayError) -> Error + 'a {
    move |source| Error::Gateway { stage, qid: qid.into(), source }
}

/// Elicits `cfg.knowledge_samples` knowledge pieces for `q`. Blank
/// completions are regenerated once and dropped if still blank.
pub fn elicit_knowledge(q: &Question, cfg: &RunConfig, gw: &Gateway) -> Result<Vec<KnowledgeRecord>> {
    let messages = render_prompt(q, PromptTag::KnowledgeGen, None)
        .map_err(GatewayError::from)
        .map_err(gateway_err("elicit", &q.id))?;
    let req = ChatRequest::new(messages, PromptTag::KnowledgeGen, cfg.knowledge_temperature, cfg.knowledge_samples)
        .for_question(&q.id)
        .with_seed(cfg.seed)
        .in_round(rounds::POOL);
    let resp = gw.complete(&req).map_err(gateway_err("elicit", &q.id))?;

    let mut texts: Vec<Option<String>> =
        resp.completions.iter().map(|c| Some(clean_knowledge(c).to_string()).filter(|t| !t.is_empty())).collect();
    let blank: Vec<u32> = (0..texts.len() as u32).filter(|&i| texts[i as usize].is_none()).collect();
    if !blank.is_empty() {
        let retry = req.clone().in_round(rounds::REGENERATE);
        let again = gw.complete_indices(&retry, &blank).map_err(gateway_err("elicit", &q.id))?;
        for (&i, c) in blank.iter().zip(&again.completions) {
            texts[i as usize] = Some(clean_knowledge(c).to_string()).filter(|t| !t.is_empty());
        }
    }

    let records: Vec<KnowledgeRecord> = texts
        .into_iter()
        .enumerate()
        .filter_map(|(i, t)| t.map(|t| KnowledgeRecord::unlabeled(&q.id, i as u32, t, cfg.knowledge_temperature)))
        .collect();
    if records.is_empty() {
        return Err(Error::ElicitationFailure { qid: q.id.clone() });
    }
    Ok(records)
}

/// One answer draw at `cfg.answer_temperature`, direct or conditioned on
/// `knowledge` (text plus the kids it was built from).
pub fn answer(
    q: &Question,
    knowledge: Option<(&str, &[String])>,
    cfg: &RunConfig,
    gw: &Gateway,
) -> Result<AnswerSample> {
    answer_draws(q, knowledge, cfg, gw, 0..1, rounds::POOL).map(|mut v| v.remove(0))
}

/// Independent answer draws sharing one prompt, one per sample index in
/// `indices`.
pub fn answer_draws(
    q: &Question,
    knowledge: Option<(&str, &[String])>,
    cfg: &RunConfig,
    gw: &Gateway,
    indices: std::ops::Range<u32>,
    round: u32,
) -> Result<Vec<AnswerSample>> {
    let (tag, text, kids) = match knowledge {
        Some((text, kids)) => (PromptTag::KnowledgeAnswer, Some(text), kids.to_vec()),
        None => (PromptTag::DirectAnswer, None, Vec::new()),
    };
    let messages = render_prompt(q, tag, text).map_err(GatewayError::from).map_err(gateway_err("answer", &q.id))?;
    let req = ChatRequest::new(messages, tag, cfg.answer_temperature, indices.end)
        .for_question(&q.id)
        .with_seed(cfg.seed)
        .in_round(round);
    let indices: Vec<u32> = indices.collect();
    let resp = gw.complete_indices_per_sample(&req, &indices).map_err(gateway_err("answer", &q.id))?;
    Ok(resp
        .into_iter()
        .map(|c| AnswerSample::from_completion(q, kids.clone(), c.text, c.tokens_in, c.tokens_out))
        .collect())
}

/// Output of labeling: leveled records, every answer sample drawn, and
/// questions skipped because elicitation failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolOutput {
    pub records: Vec<KnowledgeRecord>,
    pub samples: Vec<AnswerSample>,
    pub failures: Vec<PoolFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolFailure {
    pub qid: String,
    pub message: String,
}

/// Levels `records` (all for `q`): one direct answer shared by every piece,
/// one conditioned answer per piece.
pub fn label_question(
    q: &Question,
    records: &[KnowledgeRecord],
    cfg: &RunConfig,
    gw: &Gateway,
) -> Result<(Vec<KnowledgeRecord>, Vec<AnswerSample>)> {
    let direct = answer(q, None, cfg, gw)?;
    let mut samples = Vec::with_capacity(records.len() + 1);
    let mut labeled = Vec::with_capacity(records.len());
    for r in records {
        let kids = [r.kid.clone()];
        let with_k = answer(q, Some((&r.text, &kids)), cfg, gw)?;
        let level = assign_level(&direct, &with_k, q.gold)?;
        let mut r = r.clone();
        r.set_level(level);
        labeled.push(r);
        samples.push(with_k);
    }
    samples.insert(0, direct);
    Ok((labeled, samples))
}

/// Elicits knowledge for every question. Elicitation failures are recorded
/// and skipped; gateway errors abort.
pub fn elicit_pool(
    questions: &[Question],
    cfg: &RunConfig,
    gw: &Gateway,
) -> Result<(Vec<KnowledgeRecord>, Vec<PoolFailure>)> {
    cfg.validate()?;
    let results = ordered_map(questions, cfg.concurrency_limit as usize, |q| elicit_knowledge(q, cfg, gw));
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (q, r) in questions.iter().zip(results) {
        match r {
            Ok(rs) => records.extend(rs),
            Err(e @ Error::ElicitationFailure { .. }) => {
                failures.push(PoolFailure { qid: q.id.clone(), message: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    Ok((records, failures))
}

/// Levels an already-elicited pool. Records are grouped by question and
/// emitted in dataset order.
pub fn label_pool(
    questions: &[Question],
    pool: &[KnowledgeRecord],
    cfg: &RunConfig,
    gw: &Gateway,
) -> Result<PoolOutput> {
    cfg.validate()?;
    let mut grouped: BTreeMap<&str, Vec<KnowledgeRecord>> = BTreeMap::new();
    for r in pool {
        grouped.entry(r.qid.as_str()).or_default().push(r.clone());
    }
    let known: std::collections::HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    if let Some(qid) = grouped.keys().find(|k| !known.contains(*k)) {
        return Err(Error::Stage { stage: "label", qid: (*qid).into(), message: "not in dataset".into() });
    }
    let work: Vec<(&Question, Vec<KnowledgeRecord>)> =
        questions.iter().filter_map(|q| grouped.remove(q.id.as_str()).map(|rs| (q, rs))).collect();
    let results = ordered_map(&work, cfg.concurrency_limit as usize, |(q, rs)| label_question(q, rs, cfg, gw));
    let mut out = PoolOutput::default();
    for r in results {
        let (records, samples) = r?;
        out.records.extend(records);
        out.samples.extend(samples);
    }
    Ok(out)
}

/// Elicits and levels knowledge for every question.
pub fn build_pool(questions: &[Question], cfg: &RunConfig, gw: &Gateway) -> Result<PoolOutput> {
    cfg.validate()?;
    if questions.is_empty() {
        return Err(Error::Setup("build_pool needs at least one question".into()));
    }
    let results = ordered_map(questions, cfg.concurrency_limit as usize, |q| {
        let records = elicit_knowledge(q, cfg, gw)?;
        label_question(q, &records, cfg, gw)
    });
    let mut out = PoolOutput::default();
    for (q, r) in questions.iter().zip(results) {
        match r {
            Ok((records, samples)) => {
                out.records.extend(records);
                out.samples.extend(samples);
            }
            Err(e @ Error::ElicitationFailure { .. }) => {
                out.failures.push(PoolFailure { qid: q.id.clone(), message: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
