//! File-level stages and the end-to-end pipeline.
//!
//! Every stage records a manifest keyed by a hash of the config, its
//! parameters and its input files. Re-running a stage whose manifest key
//! matches and whose outputs exist does nothing.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use linked_core::{
    evaluate, prepare_training_set, EvalReport, KnowledgeRecord, Question, ReasoningOutcome, ScoredKnowledge,
    SplitSpec, Strategy, TrainTriple,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{DataError, Error, Result};
use crate::gateway::{Gateway, LedgerSnapshot};
use crate::io::{load_stage, persist_stage, write_json};
use crate::log;
use crate::pool::{elicit_pool, label_pool, PoolFailure};
use crate::reasoner::{run_all, score_pool};
use crate::report::write_report;
use crate::scorer::ScorerChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    stage: String,
    key: String,
    /// File names, relative to the manifest's directory.
    outputs: Vec<PathBuf>,
}

fn manifest_path(dir: &Path, stage: &str, tag: &str) -> PathBuf {
    dir.join(format!(".{stage}{tag}.manifest.json"))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Runs `body` unless the stage's manifest shows identical inputs and all
/// outputs still exist.
fn run_stage(
    stage: &'static str,
    cfg: &PipelineConfig,
    inputs: &[&Path],
    params: &serde_json::Value,
    outputs: &[PathBuf],
    body: impl FnOnce() -> Result<()>,
) -> Result<StageStatus> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update(cfg.fingerprint().as_bytes());
    h.update(params.to_string().as_bytes());
    for p in inputs {
        h.update(file_digest(p)?.as_bytes());
    }
    let key = hex::encode(h.finalize());
    let dir = outputs.first().and_then(|p| p.parent()).filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tag =
        outputs.first().and_then(|p| p.file_stem()).map(|s| format!("-{}", s.to_string_lossy())).unwrap_or_default();
    let manifest = manifest_path(dir, stage, &tag);
    if let Ok(text) = fs::read_to_string(&manifest) {
        if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
            if m.key == key && outputs.iter().all(|o| o.exists()) {
                log::event(stage, "up_to_date", json!({ "key": &key[..16] }));
                return Ok(StageStatus::UpToDate);
            }
        }
    }
    log::event(stage, "start", json!({ "key": &key[..16] }));
    body()?;
    let names = outputs.iter().map(|o| o.file_name().map(PathBuf::from).unwrap_or_default()).collect();
    write_json(&Manifest { stage: stage.into(), key, outputs: names }, &manifest)?;
    log::event(stage, "done", json!({ "outputs": outputs }));
    Ok(StageStatus::Ran)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e).into())
}

pub struct ElicitPaths {
    pub knowledge: PathBuf,
    pub failures: PathBuf,
}

pub fn elicit_paths(out_dir: &Path) -> ElicitPaths {
    ElicitPaths { knowledge: out_dir.join("knowledge.jsonl"), failures: out_dir.join("elicit_failures.jsonl") }
}

pub fn elicit_stage(
    cfg: &PipelineConfig,
    gw: &Gateway,
    dataset: &Path,
    questions: &[Question],
    out_dir: &Path,
) -> Result<StageStatus> {
    ensure_dir(out_dir)?;
    let paths = elicit_paths(out_dir);
    run_stage("elicit", cfg, &[dataset], &json!({}), &[paths.knowledge.clone(), paths.failures.clone()], || {
        let (records, failures) = elicit_pool(questions, &cfg.run, gw)?;
        for f in &failures {
            log::event("elicit", "question_skipped", json!({ "qid": f.qid, "reason": f.message }));
        }
        persist_stage(&records, &paths.knowledge)?;
        persist_stage(&failures, &paths.failures)?;
        Ok(())
    })
}

/// Answer samples for a labeled pool live next to it as `<stem>.answers.jsonl`.
pub fn answers_path(pool_out: &Path) -> PathBuf {
    let stem = pool_out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    pool_out.with_file_name(format!("{stem}.answers.jsonl"))
}

pub fn label_stage(
    cfg: &PipelineConfig,
    gw: &Gateway,
    dataset: &Path,
    questions: &[Question],
    pool_in: &Path,
    pool_out: &Path,
) -> Result<StageStatus> {
    let answers = answers_path(pool_out);
    run_stage("label", cfg, &[dataset, pool_in], &json!({}), &[pool_out.to_path_buf(), answers.clone()], || {
        let pool: Vec<KnowledgeRecord> = load_stage(pool_in)?;
        let out = label_pool(questions, &pool, &cfg.run, gw)?;
        persist_stage(&out.records, pool_out)?;
        persist_stage(&out.samples, &answers)?;
        Ok(())
    })
}

pub fn export_training_set(triples: &[TrainTriple], path: &Path) -> Result<()> {
    if triples.is_empty() {
        return Err(Error::Setup(format!("{}: nothing to train on", path.display())));
    }
    persist_stage(triples, path).map_err(Into::into)
}

pub fn prep_stage(
    cfg: &PipelineConfig,
    dataset: &Path,
    questions: &[Question],
    pool: &Path,
    out_dir: &Path,
    val_fraction: f64,
    seed: u64,
) -> Result<StageStatus> {
    ensure_dir(out_dir)?;
    let train_path = out_dir.join("train.jsonl");
    let val_path = out_dir.join("val.jsonl");
    run_stage(
        "prep",
        cfg,
        &[dataset, pool],
        &json!({ "val_fraction": val_fraction, "seed": seed }),
        &[train_path.clone(), val_path.clone()],
        || {
            let records: Vec<KnowledgeRecord> = load_stage(pool)?;
            let (train, val) =
                prepare_training_set(&records, questions, SplitSpec::with_val_fraction(val_fraction), seed)?;
            export_training_set(&train, &train_path)?;
            export_training_set(&val, &val_path)?;
            log::event("prep", "split", json!({ "train": train.len(), "val": val.len() }));
            Ok(())
        },
    )
}

pub fn scored_pool(
    questions: &[Question],
    pool: &Path,
    scorer: &ScorerChoice,
) -> Result<HashMap<String, Vec<ScoredKnowledge>>> {
    let records: Vec<KnowledgeRecord> = load_stage(pool)?;
    let scorer = scorer.build()?;
    score_pool(questions, &records, scorer.as_ref())
}

#[allow(clippy::too_many_arguments)]
pub fn reason_stage(
    cfg: &PipelineConfig,
    gw: &Gateway,
    dataset: &Path,
    questions: &[Question],
    pool: Option<&Path>,
    scorer: &ScorerChoice,
    strategy: Strategy,
    out: &Path,
) -> Result<StageStatus> {
    if strategy.needs_pool() && pool.is_none() {
        return Err(Error::Setup(format!("strategy {strategy} needs --pool")));
    }
    let mut inputs = vec![dataset];
    if let (true, Some(p)) = (strategy.needs_pool(), pool) {
        inputs.push(p);
    }
    let scorer_tag = match scorer {
        ScorerChoice::Oracle => "oracle".to_string(),
        ScorerChoice::Constant(v) => format!("constant:{v}"),
        ScorerChoice::Remote(url) => format!("remote:{url}"),
    };
    let params = json!({ "strategy": strategy, "scorer": scorer_tag });
    run_stage("reason", cfg, &inputs, &params, &[out.to_path_buf()], || {
        let before = gw.ledger();
        let scored = match (strategy.needs_pool(), pool) {
            (true, Some(p)) => Some(scored_pool(questions, p, scorer)?),
            _ => None,
        };
        let outcomes = run_all(questions, scored.as_ref(), &cfg.run, gw, strategy)?;
        let invalid = outcomes.iter().filter(|o| o.all_invalid()).count();
        persist_stage(&outcomes, out)?;
        let spent = gw.ledger().since(&before);
        log::event(
            "reason",
            "ledger",
            json!({ "strategy": strategy, "questions": outcomes.len(), "all_invalid": invalid, "ledger": spent }),
        );
        Ok(())
    })
}

/// Reports for the baseline against itself and for every method run.
pub fn eval_runs(
    baseline: &[ReasoningOutcome],
    methods: &[Vec<ReasoningOutcome>],
    dataset_tag: &str,
    seed: Option<u64>,
) -> Result<Vec<EvalReport>> {
    let mut reports = vec![evaluate(&method_name(baseline), dataset_tag, seed, baseline, baseline)?];
    for m in methods {
        reports.push(evaluate(&method_name(m), dataset_tag, seed, baseline, m)?);
    }
    Ok(reports)
}

fn method_name(outcomes: &[ReasoningOutcome]) -> String {
    outcomes.first().map(|o| o.strategy.to_string()).unwrap_or_else(|| "empty".into())
}

pub fn eval_stage(
    baseline: &Path,
    methods: &[PathBuf],
    out_dir: &Path,
    dataset_tag: &str,
    seed: Option<u64>,
) -> Result<Vec<EvalReport>> {
    ensure_dir(out_dir)?;
    let base: Vec<ReasoningOutcome> = load_stage(baseline)?;
    let mut runs = Vec::with_capacity(methods.len());
    for m in methods {
        runs.push(load_stage::<ReasoningOutcome>(m)?);
    }
    let reports = eval_runs(&base, &runs, dataset_tag, seed)?;
    write_report(&reports, out_dir)?;
    log::event("eval", "done", json!({ "runs": reports.len(), "out": out_dir }));
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    TopK,
    AnswerSamples,
    Strategy,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "top_k" => Ok(SweepParam::TopK),
            "answer_samples" | "n" => Ok(SweepParam::AnswerSamples),
            "strategy" => Ok(SweepParam::Strategy),
            other => Err(format!("unknown sweep parameter {other:?} (top_k, answer_samples, strategy)")),
        }
    }
}

/// One outcome file per swept value, plus a report over all of them
/// against a few-shot baseline.
#[allow(clippy::too_many_arguments)]
pub fn sweep_stage(
    cfg: &PipelineConfig,
    gw: &Gateway,
    dataset: &Path,
    questions: &[Question],
    pool: &Path,
    scorer: &ScorerChoice,
    strategy: Strategy,
    param: SweepParam,
    values: &[String],
    out_dir: &Path,
) -> Result<Vec<EvalReport>> {
    ensure_dir(out_dir)?;
    let baseline_path = out_dir.join("outcomes-few_shot.jsonl");
    reason_stage(cfg, gw, dataset, questions, None, scorer, Strategy::FewShot, &baseline_path)?;
    let baseline: Vec<ReasoningOutcome> = load_stage(&baseline_path)?;
    let mut reports = vec![evaluate("few_shot", &dataset_tag(questions), Some(cfg.run.seed), &baseline, &baseline)?];
    for value in values {
        let mut c = cfg.clone();
        let mut st = strategy;
        let bad = |what: &str| Error::Setup(format!("sweep value {value:?} is not a valid {what}"));
        match param {
            SweepParam::TopK => c.run.top_k = value.parse().map_err(|_| bad("top_k"))?,
            SweepParam::AnswerSamples => c.run.answer_samples = value.parse().map_err(|_| bad("sample count"))?,
            SweepParam::Strategy => st = value.parse().map_err(|_| bad("strategy"))?,
        }
        c.validate()?;
        let name = format!("{}-{}-{}", st, param_name(param), value);
        let out = out_dir.join(format!("outcomes-{name}.jsonl"));
        reason_stage(&c, gw, dataset, questions, Some(pool), scorer, st, &out)?;
        let outcomes: Vec<ReasoningOutcome> = load_stage(&out)?;
        reports.push(evaluate(&name, &dataset_tag(questions), Some(cfg.run.seed), &baseline, &outcomes)?);
    }
    write_report(&reports, out_dir)?;
    Ok(reports)
}

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::TopK => "top_k",
        SweepParam::AnswerSamples => "n",
        SweepParam::Strategy => "strategy",
    }
}

pub fn dataset_tag(questions: &[Question]) -> String {
    questions.first().map(|q| q.dataset_tag.clone()).unwrap_or_default()
}

/// Ledger deltas per stage of one pipeline run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineSummary {
    pub ledgers: Vec<(String, LedgerSnapshot)>,
    pub reports: Vec<EvalReport>,
    pub failures: usize,
}

impl PipelineSummary {
    pub fn ledger(&self, stage: &str) -> Option<LedgerSnapshot> {
        self.ledgers.iter().find(|(s, _)| s == stage).map(|(_, l)| *l)
    }
}

/// elicit → label → prep → (scorer) → reason → eval, all under `out_dir`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    gw: &Gateway,
    dataset: &Path,
    questions: &[Question],
    scorer: &ScorerChoice,
    strategies: &[Strategy],
    out_dir: &Path,
) -> Result<PipelineSummary> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let mut summary = PipelineSummary::default();
    let mut track = |stage: &str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let before = gw.ledger();
        f()?;
        summary.ledgers.push((stage.to_string(), gw.ledger().since(&before)));
        Ok(())
    };

    let paths = elicit_paths(out_dir);
    track("elicit", &mut || elicit_stage(cfg, gw, dataset, questions, out_dir).map(drop))?;
    let pool = out_dir.join("pool.jsonl");
    track("label", &mut || label_stage(cfg, gw, dataset, questions, &paths.knowledge, &pool).map(drop))?;
    let remote = matches!(scorer, ScorerChoice::Remote(_));
    track("prep", &mut || {
        match prep_stage(cfg, dataset, questions, &pool, out_dir, cfg.val_fraction, cfg.run.seed) {
            // Built-in scorers need no training data.
            Err(Error::Prep(e)) if !remote => {
                log::event("prep", "skipped", json!({ "reason": e.to_string() }));
                Ok(())
            }
            other => other.map(drop),
        }
    })?;

    if let ScorerChoice::Remote(url) = scorer {
        if let Err(e) = crate::scorer::RemoteScorer::new(url).and_then(|s| s.health()) {
            return Err(Error::Setup(format!(
                "{e}; train a scorer on {} / {}, serve it at {url}, then re-run",
                out_dir.join("train.jsonl").display(),
                out_dir.join("val.jsonl").display()
            )));
        }
    }

    let baseline_path = out_dir.join("outcomes-few_shot.jsonl");
    track("reason:few_shot", &mut || {
        reason_stage(cfg, gw, dataset, questions, None, scorer, Strategy::FewShot, &baseline_path).map(drop)
    })?;
    let mut method_paths = Vec::new();
    for &st in strategies.iter().filter(|s| **s != Strategy::FewShot) {
        let out = out_dir.join(format!("outcomes-{st}.jsonl"));
        track(&format!("reason:{st}"), &mut || {
            reason_stage(cfg, gw, dataset, questions, Some(&pool), scorer, st, &out).map(drop)
        })?;
        method_paths.push(out);
    }
    summary.reports = eval_stage(&baseline_path, &method_paths, out_dir, &dataset_tag(questions), Some(cfg.run.seed))?;
    let failures: Vec<PoolFailure> = load_stage(&paths.failures)?;
    summary.failures = failures.len();
    Ok(summary)
}
