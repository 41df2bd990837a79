//! On-disk response cache, one file per (request, sample index).

use std::fs;
use std::path::{Path, PathBuf};

use linked_core::{ChatRequest, Completion};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;
use crate::io::write_atomic;

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| GatewayError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex SHA-256 over model id, rendered messages, temperature, round, run
    /// seed and sample index.
    pub fn key(model: &str, req: &ChatRequest, sample_index: u32) -> String {
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(model.as_bytes());
        for m in &req.messages {
            field(format!("{:?}", m.role).as_bytes());
            field(m.content.as_bytes());
        }
        field(&req.temperature.to_bits().to_le_bytes());
        field(&req.round.to_le_bytes());
        field(&req.seed.to_le_bytes());
        field(&sample_index.to_le_bytes());
        hex::encode(h.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<Completion> {
        let bytes = fs::read(self.path_for(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    /// Inserts unless an entry already exists. Concurrent writers of the
    /// same key race on an atomic rename, so readers never see partial
    /// files and the key maps to exactly one file.
    pub fn put(&self, key: &str, value: &Completion) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        if path.exists() {
            return Ok(());
        }
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent).map_err(|e| GatewayError::Cache(e.to_string()))?;
        let bytes = serde_json::to_vec(value).map_err(|e| GatewayError::Cache(e.to_string()))?;
        write_atomic(&path, &bytes).map_err(|e| GatewayError::Cache(e.to_string()))
    }

    pub fn len(&self) -> usize {
        walk_count(&self.dir)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn walk_count(dir: &Path) -> usize {
    let Ok(entries) = fs::read_dir(dir) else { return 0 };
    entries
        .flatten()
        .map(|e| {
            let p = e.path();
            if p.is_dir() {
                walk_count(&p)
            } else if p.extension().is_some_and(|x| x == "json") {
                1
            } else {
                0
            }
        })
        .sum()
}
