//! `simploop refine`: run the refinement loop and export the best prompt.
//!
//! Outputs land in --out-dir: leaderboard.jsonl and log.jsonl always (they
//! hold whatever progress the run made); final_prompt.txt and
//! run_manifest.json only when the loop ended by budget or plateau, so
//! their presence certifies a completed run.

use anyhow::anyhow;
use simploop_core::refine::{
    run_refinement, select_final, shot_pool, RefineConfig, RefineError, StopReason,
    DEFAULT_SHORT_INPUT_WORDS,
};
use simploop_core::simplifier::PromptOrigin;
use simploop_core::EvalContext;

use crate::backends::BACKEND_ID;
use crate::commands::{build_runtime, load_candidate, load_corpus, to_jsonl, write_file};
use crate::errors::CliError;
use crate::manifest::ManifestBuilder;
use crate::{GlobalOpts, RefineArgs};

pub fn run(argv: &[String], global: &GlobalOpts, args: RefineArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(argv, &("refine", global, &args));
    let runtime = build_runtime(global)?;
    manifest.backend_ids(&runtime.backend_ids);
    manifest.cache_dir(global.cache_dir.as_deref());

    let (corpus, corpus_content) = load_corpus(&args.corpus, global.strict)?;
    manifest.corpus(&corpus_content);
    let seed = load_candidate(&args.seed_prompt, PromptOrigin::Seed)?;
    let config = RefineConfig {
        max_iterations: args.max_iters,
        plateau_window: args.plateau_window,
        plateau_epsilon: args.epsilon,
        rng_seed: args.seed,
        ..RefineConfig::default()
    };
    let ctx = EvalContext::single_backend(&runtime.gateway, BACKEND_ID);

    eprintln!(
        "refining against {} texts (budget {} iterations, window {}, epsilon {})",
        corpus.len(),
        config.max_iterations,
        config.plateau_window,
        config.plateau_epsilon
    );
    let outcome = run_refinement(&ctx, seed, &corpus, &config)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|err| CliError::data(anyhow!("cannot create {}: {err}", args.out_dir.display())))?;
    let leaderboard_path = args.out_dir.join("leaderboard.jsonl");
    write_file(&leaderboard_path, &to_jsonl(outcome.leaderboard.entries()))?;
    manifest.artifact(&leaderboard_path);
    let log_path = args.out_dir.join("log.jsonl");
    write_file(&log_path, &to_jsonl(&outcome.log))?;
    manifest.artifact(&log_path);

    let stopped = match &outcome.stop_reason {
        StopReason::MaxIterations => "iteration budget exhausted".to_string(),
        StopReason::Plateau => "best score plateaued".to_string(),
        StopReason::ScoreError { message } => format!("scoring failed: {message}"),
    };
    eprintln!("stopped after {} log records: {stopped}", outcome.log.len());

    if let StopReason::ScoreError { message } = &outcome.stop_reason {
        return Err(CliError::backend(anyhow!(
            "refinement aborted ({message}); partial results in {}",
            args.out_dir.display()
        )));
    }

    let entry = match args.pick.as_deref() {
        Some(prompt_id) => outcome
            .leaderboard
            .find(prompt_id)
            .ok_or_else(|| CliError::from(RefineError::UnknownPick(prompt_id.to_string())))?,
        None => outcome
            .leaderboard
            .best()
            .ok_or_else(|| CliError::from(RefineError::EmptyLeaderboard))?,
    };
    // the few-shot pool comes from the exported entry's own rewrites
    let pool = shot_pool(&corpus, &entry.score);
    let (final_candidate, warnings) = select_final(
        &outcome.leaderboard,
        &pool,
        args.shots,
        DEFAULT_SHORT_INPUT_WORDS,
        args.pick.as_deref(),
    )?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }

    let final_path = args.out_dir.join("final_prompt.txt");
    write_file(&final_path, &final_candidate.to_file_string())?;
    manifest.artifact(&final_path);
    eprintln!(
        "exported {:?} (score {:.4}, {} few-shots) to {}",
        entry.candidate.prompt_id,
        entry.score.score,
        final_candidate.few_shots.len(),
        final_path.display()
    );
    manifest.write(&args.out_dir)?;
    Ok(())
}
