//! Run manifest emission for artifact-producing commands.
//!
//! The manifest is written after every artifact it names, so its presence
//! certifies a completed run. The config hash covers the full resolved
//! configuration (command name, shared flags, command flags): it changes
//! iff any configuration byte changes. Timestamps are the only fields that
//! differ between byte-identical reruns.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::CliError;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Audit record for one finished run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// argv as invoked.
    pub command_line: Vec<String>,
    /// SHA-256 over the resolved configuration.
    pub config_hash: String,
    pub backend_ids: Vec<String>,
    pub cache_dir: Option<PathBuf>,
    /// SHA-256 of the corpus file content, when the command consumed one.
    pub corpus_hash: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    /// Every file this run produced, in emission order.
    pub artifact_paths: Vec<PathBuf>,
}

/// Accumulates manifest fields while a command runs.
pub struct ManifestBuilder {
    command_line: Vec<String>,
    config_hash: String,
    backend_ids: Vec<String>,
    cache_dir: Option<PathBuf>,
    corpus_hash: Option<String>,
    started_at: DateTime<Utc>,
    artifacts: Vec<PathBuf>,
}

impl ManifestBuilder {
    /// Starts the clock and freezes the config hash. `config` must carry
    /// the command name plus every flag that shapes the run.
    pub fn new(argv: &[String], config: &impl Serialize) -> ManifestBuilder {
        let canonical = serde_json::to_string(config).expect("configuration serializes");
        ManifestBuilder {
            command_line: argv.to_vec(),
            config_hash: sha256_hex(canonical.as_bytes()),
            backend_ids: Vec::new(),
            cache_dir: None,
            corpus_hash: None,
            started_at: Utc::now(),
            artifacts: Vec::new(),
        }
    }

    pub fn backend_ids(&mut self, ids: &[String]) {
        self.backend_ids = ids.to_vec();
    }

    pub fn cache_dir(&mut self, dir: Option<&Path>) {
        self.cache_dir = dir.map(Path::to_path_buf);
    }

    pub fn corpus(&mut self, content: &str) {
        self.corpus_hash = Some(sha256_hex(content.as_bytes()));
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Writes `run_manifest.json` into `dir`. Call once everything else is
    /// on disk; nothing may be written after it.
    pub fn write(self, dir: &Path) -> Result<PathBuf, CliError> {
        let stamp =
            |at: DateTime<Utc>| at.to_rfc3339_opts(SecondsFormat::Micros, true);
        let manifest = RunManifest {
            command_line: self.command_line,
            config_hash: self.config_hash,
            backend_ids: self.backend_ids,
            cache_dir: self.cache_dir,
            corpus_hash: self.corpus_hash,
            started_at: stamp(self.started_at),
            finished_at: stamp(Utc::now()),
            artifact_paths: self.artifacts,
        };
        let path = dir.join(MANIFEST_FILE);
        let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        body.push('\n');
        std::fs::write(&path, body)
            .map_err(|err| CliError::data(anyhow!("cannot write {}: {err}", path.display())))?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
