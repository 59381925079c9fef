use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IngestError;
use crate::data::Timestamp;

/// Hex SHA-256 of the canonical request URL.
pub fn cache_key(canonical_request: &str) -> String {
    hex::encode(Sha256::digest(canonical_request.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: String,
    pub fetched_at: Timestamp,
    /// Base64 of the raw response body.
    pub body: String,
}

impl CacheEntry {
    pub fn body_bytes(&self) -> Result<Vec<u8>, base64::DecodeError> {
        STANDARD.decode(&self.body)
    }
}

/// One JSON file per entry, named `<key>.json`.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
    max_age: Option<chrono::Duration>,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), max_age: None }
    }

    /// Entries older than `max_age` are treated as missing.
    pub fn with_max_age(mut self, max_age: chrono::Duration) -> Self {
        self.max_age = Some(max_age);
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, request: &str, now: Timestamp) -> Result<Option<Vec<u8>>, IngestError> {
        let key = cache_key(request);
        let path = self.path(&key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(IngestError::Cache(format!("{}: {e}", path.display()))),
        };
        let entry: CacheEntry =
            serde_json::from_str(&text).map_err(|e| IngestError::Cache(format!("{}: {e}", path.display())))?;
        if entry.key != key {
            return Err(IngestError::Cache(format!("{}: key mismatch", path.display())));
        }
        if self.max_age.is_some_and(|age| now - entry.fetched_at > age) {
            return Ok(None);
        }
        entry.body_bytes().map(Some).map_err(|e| IngestError::Cache(format!("{}: {e}", path.display())))
    }

    pub fn put(&self, request: &str, body: &[u8], fetched_at: Timestamp) -> Result<(), IngestError> {
        fs::create_dir_all(&self.dir).map_err(|e| IngestError::Cache(format!("{}: {e}", self.dir.display())))?;
        let key = cache_key(request);
        let entry =
            CacheEntry { key: key.clone(), request: request.to_string(), fetched_at, body: STANDARD.encode(body) };
        let path = self.path(&key);
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string_pretty(&entry).expect("entry serializes");
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| IngestError::Cache(format!("{}: {e}", path.display())))
    }
}
