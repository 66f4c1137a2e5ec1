//! Plot-ready CSV emission for study analyses.
//!
//! Five fixed-schema files per run. Effect rows always appear for every
//! condition and scope; a contrast that could not be computed (missing
//! arm, groups too small) keeps its row with the numeric fields left
//! empty. Floats are written with six decimal places so repeated runs are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::stats::EffectEstimate;
use super::{ScopedEffect, StudyAnalysis, SuppEffect};

pub const EFFECT_HEADER: &str = "condition,scope,delta,ci_low,ci_high,n_control,n_treatment";
pub const SCATTER_HEADER: &str =
    "condition,question_id,acc_original,acc_simplified,n_original,n_simplified,fit_slope,fit_intercept";
pub const SUPP_HEADER: &str =
    "metric,condition,scope,delta,ci_low,ci_high,n_control,n_treatment";

/// The five report files, in emission order.
pub const REPORT_FILES: [&str; 5] = [
    "fig3_accuracy.csv",
    "fig4_confidence.csv",
    "fig5_ease.csv",
    "fig6_scatter.csv",
    "supp_arm3_arm6.csv",
];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn effect_fields(estimate: Option<&EffectEstimate>) -> String {
    match estimate {
        Some(e) => format!(
            "{:.6},{:.6},{:.6},{},{}",
            e.delta, e.ci_low, e.ci_high, e.n_control, e.n_treatment
        ),
        None => ",,,,".to_string(),
    }
}

fn effect_csv(effects: &[ScopedEffect]) -> String {
    let mut out = String::from(EFFECT_HEADER);
    out.push('\n');
    for effect in effects {
        let _ = writeln!(
            out,
            "{},{},{}",
            effect.condition,
            effect.scope,
            effect_fields(effect.estimate.as_ref())
        );
    }
    out
}

fn scatter_csv(analysis: &StudyAnalysis) -> String {
    let mut out = String::from(SCATTER_HEADER);
    out.push('\n');
    for (condition, table) in &analysis.scatter {
        let fit_fields = match table.fit {
            Some(fit) => format!("{:.6},{:.6}", fit.slope, fit.intercept),
            None => ",".to_string(),
        };
        for row in &table.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{}",
                condition,
                row.question_id,
                row.acc_original,
                row.acc_simplified,
                row.n_original,
                row.n_simplified,
                fit_fields
            );
        }
    }
    out
}

fn supp_csv(effects: &[SuppEffect]) -> String {
    let mut out = String::from(SUPP_HEADER);
    out.push('\n');
    for effect in effects {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            effect.metric,
            effect.condition,
            effect.scope,
            effect_fields(effect.estimate.as_ref())
        );
    }
    out
}

/// Writes the five report files into `out_dir` (created if missing) and
/// returns their paths in [`REPORT_FILES`] order.
pub fn emit_report(analysis: &StudyAnalysis, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir)
        .map_err(|source| ReportError::Io { path: out_dir.to_path_buf(), source })?;
    let contents = [
        effect_csv(&analysis.accuracy),
        effect_csv(&analysis.confidence),
        effect_csv(&analysis.ease),
        scatter_csv(analysis),
        supp_csv(&analysis.supplementary),
    ];
    let mut written = Vec::with_capacity(REPORT_FILES.len());
    for (name, content) in REPORT_FILES.iter().zip(contents) {
        let path = out_dir.join(name);
        fs::write(&path, content)
            .map_err(|source| ReportError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Topic;
    use crate::study::stats::{compare_arms, TestMethod};
    use crate::study::{
        analyze_study, AnalysisConfig, McqResponse, McqRow, ResponseSet, StudyArm,
    };

    fn synthetic_set() -> ResponseSet {
        let mut set = ResponseSet::default();
        for p in 0..24 {
            let arm = StudyArm::ALL[p % 6];
            for q in 0..4 {
                set.mcq.push(McqRow {
                    topic: Topic::PubMed,
                    arm,
                    attention_pass: true,
                    response: McqResponse {
                        participant_id: format!("p{p:02}"),
                        question_id: format!("q{q}"),
                        selected_index: 0,
                        correct: (p * 7 + q * 3) % 5 > 1,
                        confidence_likert: ((p + q) % 5) as i8 - 2,
                    },
                });
            }
        }
        set
    }

    #[test]
    fn emits_all_five_files_with_exact_headers() {
        let dir = tempfile::tempdir().unwrap();
        let analysis = analyze_study(&synthetic_set(), &AnalysisConfig::default());
        let paths = emit_report(&analysis, dir.path()).unwrap();
        assert_eq!(paths.len(), 5);
        for (path, name) in paths.iter().zip(REPORT_FILES) {
            assert_eq!(path.file_name().unwrap().to_str().unwrap(), name);
            assert!(path.exists());
        }
        let fig3 = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(fig3.lines().next().unwrap(), EFFECT_HEADER);
        assert_eq!(fig3.lines().count(), 15, "header + 14 effect rows");
        let fig6 = fs::read_to_string(&paths[3]).unwrap();
        assert_eq!(fig6.lines().next().unwrap(), SCATTER_HEADER);
        let supp = fs::read_to_string(&paths[4]).unwrap();
        assert_eq!(supp.lines().next().unwrap(), SUPP_HEADER);
        assert_eq!(supp.lines().count(), 43, "header + 42 supplementary rows");
    }

    #[test]
    fn missing_arm_rows_stay_with_empty_fields() {
        // open-book only: every closed row must exist with blank numbers
        let mut set = synthetic_set();
        set.mcq.retain(|r| r.arm.condition() == crate::study::Condition::Open);
        let analysis = analyze_study(&set, &AnalysisConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&analysis, dir.path()).unwrap();
        let fig3 = fs::read_to_string(&paths[0]).unwrap();
        let closed_rows: Vec<&str> =
            fig3.lines().filter(|l| l.starts_with("closed,")).collect();
        assert_eq!(closed_rows.len(), 7);
        for row in closed_rows {
            assert!(row.ends_with(",,,,"), "expected empty effect fields: {row}");
        }
        let open_overall =
            fig3.lines().find(|l| l.starts_with("open,overall,")).unwrap();
        assert!(!open_overall.ends_with(",,,,"));
    }

    #[test]
    fn fig3_deltas_match_recomputed_contrasts() {
        let set = synthetic_set();
        let analysis = analyze_study(&set, &AnalysisConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&analysis, dir.path()).unwrap();
        let fig3 = fs::read_to_string(&paths[0]).unwrap();

        // recompute the open/overall contrast straight from the scored
        // responses and compare the formatted fields byte for byte
        let table = crate::study::score_responses(&set);
        let control: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.arm == StudyArm::OriginalOpen)
            .map(|r| r.accuracy)
            .collect();
        let treatment: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.arm == StudyArm::SimplifiedOpen)
            .map(|r| r.accuracy)
            .collect();
        let est = compare_arms("accuracy", &control, &treatment, TestMethod::Pooled).unwrap();
        let expected = format!(
            "open,overall,{:.6},{:.6},{:.6},{},{}",
            est.delta, est.ci_low, est.ci_high, est.n_control, est.n_treatment
        );
        let actual = fig3.lines().find(|l| l.starts_with("open,overall,")).unwrap();
        assert_eq!(actual, expected);
    }

    #[test]
    fn emission_is_deterministic() {
        let analysis = analyze_study(&synthetic_set(), &AnalysisConfig::default());
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let paths_a = emit_report(&analysis, dir_a.path()).unwrap();
        let paths_b = emit_report(&analysis, dir_b.path()).unwrap();
        for (a, b) in paths_a.iter().zip(&paths_b) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
    }

    #[test]
    fn scatter_rows_carry_the_fit() {
        let analysis = analyze_study(&synthetic_set(), &AnalysisConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&analysis, dir.path()).unwrap();
        let fig6 = fs::read_to_string(&paths[3]).unwrap();
        let open_rows: Vec<&str> = fig6.lines().filter(|l| l.starts_with("open,")).collect();
        assert_eq!(open_rows.len(), 4, "four questions in the synthetic set");
        let fit_fields: std::collections::BTreeSet<String> = open_rows
            .iter()
            .map(|row| {
                let cols: Vec<&str> = row.split(',').collect();
                format!("{},{}", cols[6], cols[7])
            })
            .collect();
        assert_eq!(fit_fields.len(), 1, "every row repeats the same fit");
    }
}
