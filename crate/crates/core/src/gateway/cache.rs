//! Content-addressed transcript store.
//!
//! One file per request, named by the SHA-256 hex digest of the canonical
//! request JSON. Each file holds both the canonical request and the recorded
//! response, so every lookup can verify integrity by rehashing the stored
//! request against the filename. Writes go to a temporary file in the same
//! directory and are renamed into place, so concurrent writers of the same
//! key are safe and a crash never leaves a partial record.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FinishReason;

/// A recorded backend response, replayable bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CachedResponse {
    Completion { text: String, finish_reason: FinishReason },
    OptionScores { log_scores: Vec<f64> },
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    request: String,
    response: CachedResponse,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cache record {path}: stored request hashes to {actual}, filename says {expected}")]
    Corrupt { path: PathBuf, expected: String, actual: String },
    #[error("unreadable cache record {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

/// Directory-backed request/response store keyed by request hash.
#[derive(Debug, Clone)]
pub struct TranscriptCache {
    dir: PathBuf,
}

impl TranscriptCache {
    /// Opens (creating if needed) the cache directory.
    pub fn new(dir: impl AsRef<Path>) -> Result<Self, CacheError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|source| CacheError::Io { path: dir.clone(), source })?;
        Ok(TranscriptCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Fetches the record for `key`, verifying it against its filename.
    pub fn lookup(&self, key: &str) -> Result<Option<CachedResponse>, CacheError> {
        let path = self.record_path(key);
        let raw = match fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(CacheError::Io { path, source }),
        };
        let record: CacheRecord = serde_json::from_str(&raw)
            .map_err(|e| CacheError::Malformed { path: path.clone(), message: e.to_string() })?;
        let actual = super::request_key(&record.request);
        if actual != key {
            return Err(CacheError::Corrupt { path, expected: key.to_string(), actual });
        }
        Ok(Some(record.response))
    }

    /// Writes the record for `key` atomically. Overwrites any existing record
    /// with the same key; identical requests produce identical records.
    pub fn store(
        &self,
        key: &str,
        canonical_request: &str,
        response: &CachedResponse,
    ) -> Result<(), CacheError> {
        let record =
            CacheRecord { request: canonical_request.to_string(), response: response.clone() };
        let body = serde_json::to_vec(&record)
            .expect("cache record serialization cannot fail");
        let path = self.record_path(key);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(|source| CacheError::Io { path: self.dir.clone(), source })?;
        tmp.write_all(&body)
            .map_err(|source| CacheError::Io { path: path.clone(), source })?;
        tmp.persist(&path)
            .map_err(|e| CacheError::Io { path: path.clone(), source: e.error })?;
        Ok(())
    }

    /// Number of records currently stored.
    pub fn len(&self) -> Result<usize, CacheError> {
        let entries = fs::read_dir(&self.dir)
            .map_err(|source| CacheError::Io { path: self.dir.clone(), source })?;
        let mut n = 0;
        for entry in entries {
            let entry = entry.map_err(|source| CacheError::Io { path: self.dir.clone(), source })?;
            if entry.path().extension().is_some_and(|e| e == "json") {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn is_empty(&self) -> Result<bool, CacheError> {
        Ok(self.len()? == 0)
    }

    fn record_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn sample_key(request: &str) -> String {
        crate::gateway::request_key(request)
    }

    #[test]
    fn store_then_lookup_roundtrips() {
        let dir = TempDir::new().unwrap();
        let cache = TranscriptCache::new(dir.path()).unwrap();
        let request = r#"{"kind":"complete","prompt":"hi"}"#;
        let key = sample_key(request);
        let response = CachedResponse::Completion {
            text: "hello".into(),
            finish_reason: FinishReason::Complete,
        };
        cache.store(&key, request, &response).unwrap();
        assert_eq!(cache.lookup(&key).unwrap(), Some(response));
        assert_eq!(cache.len().unwrap(), 1);
    }

    #[test]
    fn missing_key_is_none() {
        let dir = TempDir::new().unwrap();
        let cache = TranscriptCache::new(dir.path()).unwrap();
        assert_eq!(cache.lookup(&"0".repeat(64)).unwrap(), None);
    }

    #[test]
    fn tampered_record_is_detected() {
        let dir = TempDir::new().unwrap();
        let cache = TranscriptCache::new(dir.path()).unwrap();
        let request = r#"{"kind":"complete","prompt":"hi"}"#;
        let key = sample_key(request);
        let response = CachedResponse::OptionScores { log_scores: vec![0.0, 1.0] };
        cache.store(&key, request, &response).unwrap();

        // swap in a record whose stored request no longer matches the filename
        let path = dir.path().join(format!("{key}.json"));
        let tampered = serde_json::json!({
            "request": r#"{"kind":"complete","prompt":"other"}"#,
            "response": {"kind": "option_scores", "log_scores": [0.0, 1.0]},
        });
        std::fs::write(&path, tampered.to_string()).unwrap();

        let err = cache.lookup(&key).unwrap_err();
        assert!(matches!(err, CacheError::Corrupt { .. }), "got {err:?}");
    }

    #[test]
    fn unparseable_record_is_malformed() {
        let dir = TempDir::new().unwrap();
        let cache = TranscriptCache::new(dir.path()).unwrap();
        let key = "a".repeat(64);
        std::fs::write(dir.path().join(format!("{key}.json")), "not json").unwrap();
        let err = cache.lookup(&key).unwrap_err();
        assert!(matches!(err, CacheError::Malformed { .. }));
    }

    #[test]
    fn option_scores_roundtrip_bitwise() {
        let dir = TempDir::new().unwrap();
        let cache = TranscriptCache::new(dir.path()).unwrap();
        let request = r#"{"kind":"score_options","prompt":"rate"}"#;
        let key = sample_key(request);
        let scores = vec![0.1, -2.5, std::f64::consts::PI, 1e-300];
        cache
            .store(&key, request, &CachedResponse::OptionScores { log_scores: scores.clone() })
            .unwrap();
        match cache.lookup(&key).unwrap().unwrap() {
            CachedResponse::OptionScores { log_scores } => {
                assert_eq!(log_scores.len(), scores.len());
                for (a, b) in log_scores.iter().zip(&scores) {
                    assert_eq!(a.to_bits(), b.to_bits(), "replay must be bit-identical");
                }
            }
            other => panic!("wrong record kind: {other:?}"),
        }
    }

    #[test]
    fn restore_overwrite_is_idempotent() {
        let dir = TempDir::new().unwrap();
        let cache = TranscriptCache::new(dir.path()).unwrap();
        let request = r#"{"kind":"complete","prompt":"x"}"#;
        let key = sample_key(request);
        let response = CachedResponse::Completion {
            text: "y".into(),
            finish_reason: FinishReason::Complete,
        };
        cache.store(&key, request, &response).unwrap();
        let first = std::fs::read(dir.path().join(format!("{key}.json"))).unwrap();
        cache.store(&key, request, &response).unwrap();
        let second = std::fs::read(dir.path().join(format!("{key}.json"))).unwrap();
        assert_eq!(first, second);
        assert_eq!(cache.len().unwrap(), 1);
    }
}
