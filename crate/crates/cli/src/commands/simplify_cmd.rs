//! `simploop simplify`: rewrite every corpus text with one candidate.

use std::path::Path;

use rayon::prelude::*;
use simploop_core::gateway::{ModelRole, RoleKind};
use simploop_core::simplifier::{simplify, PromptOrigin, Rewrite};

use crate::backends::BACKEND_ID;
use crate::commands::{build_runtime, load_candidate, load_corpus, to_jsonl, write_file};
use crate::errors::CliError;
use crate::manifest::ManifestBuilder;
use crate::{GlobalOpts, SimplifyArgs};

pub fn run(argv: &[String], global: &GlobalOpts, args: SimplifyArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(argv, &("simplify", global, &args));
    let runtime = build_runtime(global)?;
    manifest.backend_ids(&runtime.backend_ids);
    manifest.cache_dir(global.cache_dir.as_deref());

    let (corpus, corpus_content) = load_corpus(&args.corpus, global.strict)?;
    manifest.corpus(&corpus_content);
    let candidate = load_candidate(&args.prompt, PromptOrigin::Manual)?;
    let role = ModelRole::new(RoleKind::Simplifier, BACKEND_ID);

    eprintln!(
        "simplifying {} texts with prompt {:?}",
        corpus.len(),
        candidate.prompt_id
    );
    // fan out per text; one failure aborts the batch with its text named
    let rewrites: Vec<Rewrite> = corpus
        .excerpts()
        .par_iter()
        .map(|excerpt| {
            simplify(&runtime.gateway, &role, &candidate, &excerpt.id, &excerpt.original_text)
                .map_err(|err| {
                    CliError::from(err).with_context(format!("text {:?}", excerpt.id))
                })
        })
        .collect::<Result<_, _>>()?;

    write_file(&args.out, &to_jsonl(&rewrites))?;
    manifest.artifact(&args.out);
    eprintln!("wrote {} rewrites to {}", rewrites.len(), args.out.display());

    let manifest_dir = match args.out.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    manifest.write(manifest_dir)?;
    Ok(())
}
