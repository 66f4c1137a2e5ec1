//! Command-line entry point for the simplification pipeline.
//!
//! One binary wires every library module: corpus inspection, single-shot
//! readability and fidelity evals, batch simplification, refinement runs,
//! and randomized-study assignment, analysis, and report emission.
//!
//! Exit codes are part of the interface: 0 success, 1 usage error, 2 data
//! or validation error, 3 backend error (unreachable, cache miss under
//! --offline, missing capability). Human-oriented progress goes to stderr;
//! data products go to files or stdout. Commands that produce artifacts
//! write a `run_manifest.json` last, so its presence certifies a completed
//! run.

mod backends;
mod commands;
mod errors;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "simploop",
    version,
    about = "Self-refining text simplification: autoevals, prompt refinement, study analysis"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
struct GlobalOpts {
    /// Backend to call: mock:SCRIPT.json or http:URL
    #[arg(long, global = true, value_name = "SPEC")]
    backend: Option<String>,

    /// Directory for the record/replay request cache
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    /// Never call a live backend; replay the cache and error on any miss
    #[arg(long, global = true)]
    offline: bool,

    /// Cap on concurrent backend requests
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Reject unknown fields in input files instead of warning
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inspect or validate a corpus file
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Rewrite every corpus text with one prompt candidate
    Simplify(SimplifyArgs),
    /// Single-shot judge evaluations
    Eval {
        #[command(subcommand)]
        action: EvalAction,
    },
    /// Iteratively improve a seed prompt against a corpus
    Refine(RefineArgs),
    /// Randomized-study assignment and analysis
    Study {
        #[command(subcommand)]
        action: StudyAction,
    },
}

#[derive(Subcommand, Debug)]
enum CorpusAction {
    /// Print per-topic text and question counts as JSON
    Stats {
        /// Corpus file, one record per line
        file: PathBuf,
    },
    /// Parse and check the file, reporting the first problem
    Validate {
        /// Corpus file, one record per line
        file: PathBuf,
    },
}

#[derive(Args, Debug, Serialize)]
struct SimplifyArgs {
    /// Corpus file, one record per line
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,

    /// Prompt candidate file: instructions, then fenced examples
    #[arg(long, value_name = "FILE")]
    prompt: PathBuf,

    /// Output file for rewrites, one record per line
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum EvalAction {
    /// Rate a text 1-10 with the readability judge
    Readability {
        /// File holding the text to rate
        #[arg(long, value_name = "FILE")]
        text_file: PathBuf,
    },
    /// Judge a rewrite against its original for fidelity errors
    Fidelity {
        /// File holding the original text
        #[arg(long, value_name = "FILE")]
        original: PathBuf,

        /// File holding the rewritten text
        #[arg(long, value_name = "FILE")]
        rewrite: PathBuf,
    },
}

#[derive(Args, Debug, Serialize)]
struct RefineArgs {
    /// Corpus file, one record per line
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,

    /// Seed prompt candidate file
    #[arg(long, value_name = "FILE")]
    seed_prompt: PathBuf,

    /// Iteration budget
    #[arg(long, value_name = "N", default_value_t = 20)]
    max_iters: u32,

    /// Trailing window W for the plateau stop rule
    #[arg(long, value_name = "W", default_value_t = 3)]
    plateau_window: u32,

    /// Minimum best-score gain over the window to keep going
    #[arg(long, value_name = "E", default_value_t = 0.01)]
    epsilon: f64,

    /// Output directory for leaderboard.jsonl, log.jsonl, final_prompt.txt
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    /// Few-shot examples appended to the final prompt
    #[arg(long, value_name = "N", default_value_t = 4)]
    shots: usize,

    /// Export this leaderboard prompt id instead of the top entry
    #[arg(long, value_name = "PROMPT_ID")]
    pick: Option<String>,

    /// Run seed, recorded in the manifest and config hash
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum StudyAction {
    /// Screen participants and deal arms within topic blocks
    Assign(AssignArgs),
    /// Compute arm contrasts and per-question tables as JSON
    Analyze(AnalyzeArgs),
    /// Emit the five plot-ready CSV tables
    Report(AnalyzeArgs),
}

#[derive(Args, Debug, Serialize)]
struct AssignArgs {
    /// Participant records, one per line
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,

    /// Shuffle seed; blocks derive independent streams from it
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    /// Share-deviation tolerance for the quota report
    #[arg(long, value_name = "T", default_value_t = 0.05)]
    quota_tolerance: f64,
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    /// Responses file, one record per line
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,

    /// Corpus file supplying the answer key
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    /// Welch-corrected t statistics instead of the pooled two-sample t
    #[arg(long)]
    welch: bool,

    /// Contrast raw per-response Likert values instead of per-participant means
    #[arg(long)]
    per_response: bool,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version to stdout with success; real parse
            // failures land on stderr with the usage exit code
            let failed = err.use_stderr();
            let _ = err.print();
            return if failed { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(&argv, cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
