//! Dataset ingestion and JSONL stage persistence.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use linked_core::Question;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    #[default]
    Jsonl,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    id: String,
    question: String,
    options: Vec<String>,
    answer: usize,
}

/// Loads a JSONL dataset. The dataset tag is the file stem.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<Question>, DataError> {
    let DatasetFormat::Jsonl = format;
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let tag = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: DatasetLine = serde_json::from_str(line).map_err(|e| DataError::Parse {
            path: path.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        let q = Question {
            id: raw.id,
            stem: raw.question,
            options: raw.options,
            gold: raw.answer,
            dataset_tag: tag.clone(),
        };
        q.validate().map_err(|source| DataError::Invalid { path: path.into(), line: line_no, source })?;
        if !seen.insert(q.id.clone()) {
            return Err(DataError::DuplicateId { path: path.into(), line: line_no, id: q.id });
        }
        out.push(q);
    }
    Ok(out)
}

/// Writes questions back out in the dataset schema.
pub fn write_dataset(questions: &[Question], path: &Path) -> Result<(), DataError> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        question: &'a str,
        options: &'a [String],
        answer: usize,
    }
    let lines: Vec<Line<'_>> =
        questions.iter().map(|q| Line { id: &q.id, question: &q.stem, options: &q.options, answer: q.gold }).collect();
    persist_stage(&lines, path)
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DataError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name =
        path.file_name().ok_or_else(|| DataError::io(path, std::io::Error::other("path has no file name")))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}-{:?}",
        file_name.to_string_lossy(),
        std::process::id(),
        std::thread::current().id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(DataError::io(path, e));
    }
    Ok(())
}

/// One JSON object per line, written atomically.
pub fn persist_stage<T: Serialize>(records: &[T], path: &Path) -> Result<(), DataError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn load_stage<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DataError::Parse {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), DataError> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}
