//! Structured stage events, one JSON object per line on stderr.

use std::sync::atomic::{AtomicBool, Ordering};

use serde_json::{json, Value};

static QUIET: AtomicBool = AtomicBool::new(false);

pub fn set_quiet(quiet: bool) {
    QUIET.store(quiet, Ordering::Relaxed);
}

pub fn event(stage: &str, event: &str, fields: Value) {
    if QUIET.load(Ordering::Relaxed) {
        return;
    }
    let mut line = json!({ "stage": stage, "event": event });
    if let (Some(obj), Value::Object(extra)) = (line.as_object_mut(), fields) {
        obj.extend(extra);
    }
    eprintln!("{line}");
}
