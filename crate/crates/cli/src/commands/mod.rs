//! Subcommand implementations behind one dispatch point.

mod corpus_cmd;
mod eval_cmd;
mod refine_cmd;
mod simplify_cmd;
mod study_cmd;

use std::path::Path;

use anyhow::anyhow;
use simploop_core::gateway::TranscriptCache;
use simploop_core::simplifier::{PromptCandidate, PromptOrigin};
use simploop_core::{Corpus, Gateway, Strictness};

use crate::backends::{BackendSpec, BACKEND_ID};
use crate::errors::CliError;
use crate::{Cli, Command, GlobalOpts};

pub fn dispatch(argv: &[String], cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        // the global pool caps every rayon fan-out, which is exactly the
        // set of concurrent backend calls
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|err| CliError::usage(format!("--jobs: {err}")))?;
    }
    match cli.command {
        Command::Corpus { action } => corpus_cmd::run(&cli.global, action),
        Command::Simplify(args) => simplify_cmd::run(argv, &cli.global, args),
        Command::Eval { action } => eval_cmd::run(&cli.global, action),
        Command::Refine(args) => refine_cmd::run(argv, &cli.global, args),
        Command::Study { action } => study_cmd::run(argv, &cli.global, action),
    }
}

/// A configured gateway plus the ids the manifest reports.
pub struct Runtime {
    pub gateway: Gateway,
    pub backend_ids: Vec<String>,
}

/// Builds the gateway from the shared flags. Commands that talk to models
/// call this; offline runs may omit --backend and replay the cache alone.
pub fn build_runtime(global: &GlobalOpts) -> Result<Runtime, CliError> {
    if global.offline && global.cache_dir.is_none() {
        return Err(CliError::usage(
            "--offline requires --cache-dir: an offline run can only replay recorded requests",
        ));
    }
    let mut builder = Gateway::builder();
    let mut backend_ids = Vec::new();
    if let Some(raw) = &global.backend {
        let backend = BackendSpec::parse(raw)?.build()?;
        builder = builder.backend(BACKEND_ID, backend);
        backend_ids.push(BACKEND_ID.to_string());
    } else if !global.offline {
        return Err(CliError::usage(
            "this command calls a model backend: pass --backend mock:SCRIPT.json or http:URL, \
             or --offline with a recorded --cache-dir",
        ));
    }
    if let Some(dir) = &global.cache_dir {
        builder = builder.cache(TranscriptCache::new(dir).map_err(CliError::backend)?);
    }
    Ok(Runtime { gateway: builder.offline(global.offline).build(), backend_ids })
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|err| CliError::data(anyhow!("cannot read {}: {err}", path.display())))
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|err| {
                CliError::data(anyhow!("cannot create {}: {err}", parent.display()))
            })?;
        }
    }
    std::fs::write(path, content)
        .map_err(|err| CliError::data(anyhow!("cannot write {}: {err}", path.display())))
}

/// Loads a corpus, printing lenient-mode warnings to stderr. Returns the
/// raw content too, for manifest hashing.
pub fn load_corpus(path: &Path, strict: bool) -> Result<(Corpus, String), CliError> {
    let content = read_to_string(path)?;
    let strictness = if strict { Strictness::Strict } else { Strictness::Lenient };
    let (corpus, warnings) = Corpus::parse(&content, strictness)?;
    for warning in &warnings {
        eprintln!("warning: {}: {warning}", path.display());
    }
    Ok((corpus, content))
}

/// Loads a prompt candidate file, naming the candidate after the file stem.
pub fn load_candidate(path: &Path, origin: PromptOrigin) -> Result<PromptCandidate, CliError> {
    let prompt_id = path
        .file_stem()
        .and_then(|stem| stem.to_str())
        .filter(|stem| !stem.is_empty())
        .unwrap_or("prompt");
    let content = read_to_string(path)?;
    let candidate = PromptCandidate::from_file_string(prompt_id, origin, &content)
        .map_err(|err| CliError::from(err).with_context(format!("prompt {}", path.display())))?;
    Ok(candidate)
}

/// Serializes records as line-delimited JSON.
pub fn to_jsonl<T: serde::Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}
