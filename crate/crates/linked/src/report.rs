//! Comparison reports: `report.json` plus a plain-text table.

use std::fmt::Write as _;
use std::path::Path;

use linked_core::EvalReport;

use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};

fn pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}", v * 100.0),
        None => "-".into(),
    }
}

/// Renders runs sorted by method name. Percentages carry one decimal; a
/// missing metric prints as `-`.
pub fn render_table(runs: &[EvalReport]) -> String {
    let mut sorted: Vec<&EvalReport> = runs.iter().collect();
    sorted.sort_by(|a, b| a.method.cmp(&b.method));
    let width = sorted.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    if let Some(first) = sorted.first() {
        let _ = writeln!(out, "dataset: {}", first.dataset_tag);
    }
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>10}",
        "method", "ACC", "ES", "PS", "EPS", "avg_tokens"
    );
    for r in sorted {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>10.1}",
            r.method,
            pct(Some(r.accuracy)),
            pct(r.es),
            pct(r.ps),
            pct(r.eps),
            r.avg_tokens
        );
    }
    out
}

/// Writes `report.json` and `report.txt` into `out_dir`.
pub fn write_report(runs: &[EvalReport], out_dir: &Path) -> Result<()> {
    let Some(first) = runs.first() else {
        return Err(Error::Setup("no runs to report".into()));
    };
    if let Some(other) = runs.iter().find(|r| r.dataset_tag != first.dataset_tag) {
        return Err(Error::Setup(format!(
            "runs cover different datasets: {} vs {}",
            first.dataset_tag, other.dataset_tag
        )));
    }
    let mut sorted = runs.to_vec();
    sorted.sort_by(|a, b| a.method.cmp(&b.method));
    write_json(&sorted, &out_dir.join("report.json"))?;
    write_atomic(&out_dir.join("report.txt"), render_table(&sorted).as_bytes())?;
    Ok(())
}
