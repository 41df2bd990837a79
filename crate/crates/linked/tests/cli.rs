use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use linked::bench::synthetic_questions;
use linked::io::{load_stage, write_dataset};
use linked_core::ReasoningOutcome;

fn linked(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linked"))
        .current_dir(dir)
        .args(["--quiet", "--llm-endpoint", "mock", "--no-cache"])
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&synthetic_questions(12, 3, 1, "toy"), &dir.path().join("toy.jsonl")).unwrap();
    dir
}

#[test]
fn help_and_usage_errors() {
    let dir = setup();
    assert_eq!(code(&linked(dir.path(), &["--help"])), 0);
    assert_eq!(code(&linked(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&linked(dir.path(), &["reason", "--dataset", "toy.jsonl"])), 2);
    assert_eq!(code(&linked(dir.path(), &["--top-k", "9", "elicit", "--dataset", "toy.jsonl", "--out", "o"])), 2);
    let o = linked(dir.path(), &["reason", "--dataset", "toy.jsonl", "--strategy", "mcr", "--out", "x.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--pool"));
    let o = linked(
        dir.path(),
        &["reason", "--dataset", "toy.jsonl", "--pool", "p.jsonl", "--scorer", "remote", "--out", "x.jsonl"],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("scorer-endpoint"));
    assert_eq!(code(&linked(dir.path(), &["reason", "--dataset", "toy.jsonl", "--strategy", "best", "--out", "x"])), 2);
}

#[test]
fn stage_errors_exit_with_one() {
    let dir = setup();
    assert_eq!(code(&linked(dir.path(), &["elicit", "--dataset", "missing.jsonl", "--out", "o"])), 1);
    fs::write(dir.path().join("bad.jsonl"), "{\"id\": \"x\"}\n").unwrap();
    let o = linked(dir.path(), &["elicit", "--dataset", "bad.jsonl", "--out", "o"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn stage_by_stage_run() {
    let dir = setup();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = linked(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    ok(&["elicit", "--dataset", "toy.jsonl", "--out", "run"]);
    ok(&["label", "--dataset", "toy.jsonl", "--pool", "run/knowledge.jsonl", "--out", "run/pool.jsonl"]);
    assert!(d.join("run/pool.answers.jsonl").exists());
    ok(&["prep", "--dataset", "toy.jsonl", "--pool", "run/pool.jsonl", "--out", "run", "--val-fraction", "0.25"]);
    ok(&["reason", "--dataset", "toy.jsonl", "--strategy", "few-shot", "--out", "run/base.jsonl"]);
    ok(&[
        "--n",
        "5",
        "reason",
        "--dataset",
        "toy.jsonl",
        "--pool",
        "run/pool.jsonl",
        "--scorer",
        "constant:0.3",
        "--out",
        "run/mcr.jsonl",
    ]);
    let mcr: Vec<ReasoningOutcome> = load_stage(&d.join("run/mcr.jsonl")).unwrap();
    assert_eq!(mcr.len(), 12);
    assert!(mcr.iter().all(|o| o.samples.len() == 5));
    let table = ok(&["eval", "--baseline", "run/base.jsonl", "--method", "run/mcr.jsonl", "--out", "run"]);
    assert!(table.contains("mcr") && table.contains("few_shot"), "{table}");
    assert!(d.join("run/report.json").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = setup();
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"top_k": 1, "answer_samples": 2, "seed": 3}"#).unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["--config", "cfg.json"];
        args.extend_from_slice(extra);
        args.extend(["pipeline", "--dataset", "toy.jsonl", "--out", out]);
        let o = linked(d, &args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        load_stage::<ReasoningOutcome>(&d.join(out).join("outcomes-mcr.jsonl")).unwrap()
    };
    let from_file = run(&[], "a");
    assert!(from_file.iter().all(|o| o.samples.len() == 2 && o.samples[0].rationale_ids.len() == 1));
    let flagged = run(&["--top-k", "3"], "b");
    assert!(flagged.iter().all(|o| o.samples.len() == 2 && o.samples[0].rationale_ids.len() == 3));
}

#[test]
fn sweep_and_mock_bench() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(code(&linked(d, &["pipeline", "--dataset", "toy.jsonl", "--out", "p"])), 0);
    let o = linked(
        d,
        &[
            "sweep",
            "--dataset",
            "toy.jsonl",
            "--pool",
            "p/pool.jsonl",
            "--param",
            "top_k",
            "--values",
            "1,3",
            "--out",
            "s",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("mcr-top_k-1") && table.contains("mcr-top_k-3"), "{table}");
    assert_eq!(
        code(&linked(
            d,
            &[
                "sweep",
                "--dataset",
                "toy.jsonl",
                "--pool",
                "p/pool.jsonl",
                "--param",
                "temp",
                "--values",
                "1",
                "--out",
                "s"
            ]
        )),
        2
    );

    let o = linked(
        d,
        &["mock-bench", "--questions", "30", "--positive-rate", "1.0", "--scenario-questions", "50", "--out", "bench"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("bench/synthetic.jsonl").exists());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("cot_sc") && stdout.contains("positive_rate 0.5"), "{stdout}");
}
