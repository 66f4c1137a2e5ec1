//! `simploop study assign|analyze|report`.
//!
//! assign screens a participant roster, deals arms within topic blocks,
//! and writes the assigned roster, the exclusion log, and the quota
//! report. analyze computes the full contrast suite as one JSON document;
//! report emits the five plot-ready CSV tables from the same analysis.

use anyhow::anyhow;
use serde::Serialize;
use simploop_core::study::report::emit_report;
use simploop_core::study::{
    analyze_study, assign_arms, check_quotas, screen, AnalysisConfig, Exclusion, LikertUnit,
    ParticipantRecord, ResponseSet,
};
use simploop_core::{TestMethod, Topic};

use crate::commands::{load_corpus, read_to_string, to_jsonl, write_file};
use crate::errors::CliError;
use crate::manifest::ManifestBuilder;
use crate::{AnalyzeArgs, AssignArgs, GlobalOpts, StudyAction};

pub fn run(argv: &[String], global: &GlobalOpts, action: StudyAction) -> Result<(), CliError> {
    match action {
        StudyAction::Assign(args) => assign(argv, global, args),
        StudyAction::Analyze(args) => analyze(argv, global, args, Output::Json),
        StudyAction::Report(args) => analyze(argv, global, args, Output::Csv),
    }
}

#[derive(Serialize)]
struct ExclusionLine<'a> {
    participant_id: &'a str,
    topic: Topic,
    reason: &'a Exclusion,
}

fn assign(argv: &[String], global: &GlobalOpts, args: AssignArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(argv, &("study assign", global, &args));
    let content = read_to_string(&args.input)?;
    let mut records: Vec<ParticipantRecord> = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|err| {
            CliError::data(anyhow!("{}: line {}: {err}", args.input.display(), idx + 1))
        })?;
        records.push(record);
    }

    let mut exclusion_lines = String::new();
    let mut eligible: Vec<ParticipantRecord> = Vec::new();
    for record in &records {
        match screen(record, record.topic) {
            Some(reason) => {
                let line = ExclusionLine {
                    participant_id: &record.participant_id,
                    topic: record.topic,
                    reason: &reason,
                };
                exclusion_lines
                    .push_str(&serde_json::to_string(&line).expect("exclusion serializes"));
                exclusion_lines.push('\n');
            }
            None => eligible.push(record.clone()),
        }
    }
    let assignment = assign_arms(&eligible, args.seed);
    for record in &mut records {
        record.arm = assignment.get(&record.participant_id).copied();
    }
    let quotas = check_quotas(&eligible, args.quota_tolerance);

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|err| CliError::data(anyhow!("cannot create {}: {err}", args.out_dir.display())))?;
    let roster_path = args.out_dir.join("assignments.jsonl");
    write_file(&roster_path, &to_jsonl(&records))?;
    manifest.artifact(&roster_path);
    let exclusions_path = args.out_dir.join("exclusions.jsonl");
    write_file(&exclusions_path, &exclusion_lines)?;
    manifest.artifact(&exclusions_path);
    let quotas_path = args.out_dir.join("quotas.json");
    let mut quotas_body = serde_json::to_string_pretty(&quotas).expect("quotas serialize");
    quotas_body.push('\n');
    write_file(&quotas_path, &quotas_body)?;
    manifest.artifact(&quotas_path);

    eprintln!(
        "assigned {} of {} participants ({} excluded); quotas {}",
        eligible.len(),
        records.len(),
        records.len() - eligible.len(),
        if quotas.all_green { "met" } else { "flagged" }
    );
    manifest.write(&args.out_dir)?;
    Ok(())
}

enum Output {
    Json,
    Csv,
}

fn analyze(
    argv: &[String],
    global: &GlobalOpts,
    args: AnalyzeArgs,
    output: Output,
) -> Result<(), CliError> {
    let command = match output {
        Output::Json => "study analyze",
        Output::Csv => "study report",
    };
    let mut manifest = ManifestBuilder::new(argv, &(command, global, &args));
    let (corpus, corpus_content) = load_corpus(&args.corpus, global.strict)?;
    manifest.corpus(&corpus_content);

    let content = read_to_string(&args.input)?;
    let set = ResponseSet::parse(&content, &corpus.answer_key())
        .map_err(|err| CliError::from(err).with_context(args.input.display().to_string()))?;
    eprintln!(
        "ingested {} MCQ responses and {} task-load responses",
        set.mcq.len(),
        set.ease.len()
    );
    let config = AnalysisConfig {
        method: if args.welch { TestMethod::Welch } else { TestMethod::Pooled },
        likert_unit: if args.per_response {
            LikertUnit::PerResponse
        } else {
            LikertUnit::PerParticipantMean
        },
    };
    let analysis = analyze_study(&set, &config);

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|err| CliError::data(anyhow!("cannot create {}: {err}", args.out_dir.display())))?;
    match output {
        Output::Json => {
            let path = args.out_dir.join("analysis.json");
            let mut body =
                serde_json::to_string_pretty(&analysis).expect("analysis serializes");
            body.push('\n');
            write_file(&path, &body)?;
            manifest.artifact(&path);
            eprintln!("wrote {}", path.display());
        }
        Output::Csv => {
            let files = emit_report(&analysis, &args.out_dir)?;
            for file in &files {
                manifest.artifact(file);
            }
            eprintln!("wrote {} report files to {}", files.len(), args.out_dir.display());
        }
    }
    manifest.write(&args.out_dir)?;
    Ok(())
}
