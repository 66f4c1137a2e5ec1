//! Fidelity autoeval: claim-level comparison of a rewrite to its original.
//!
//! Three judged stages feed one pure scoring step: decompose the original
//! into atomic claims, map each claim to a verbatim rewrite excerpt, classify
//! fidelity errors against an eight-kind taxonomy, then sum fixed per-kind
//! weights into the error score. Judge output is JSON with a shape fixed per
//! stage; a reply that fails to parse gets exactly one repair round before
//! the stage errors out, because leniently accepting malformed output would
//! corrupt scores.
//!
//! Weights per kind: MissingClaim 2, SpecificityLost 1, NuanceLost 2,
//! UnfactualAddition 4, OffTopicAddition 1, FactualityDistortion 4,
//! MajorFidelityLoss 3, MinorFidelityLoss 1. The first three kinds are
//! information loss, the next two information gain, the last three
//! distortion. Completeness errors are loss + distortion; entailment errors
//! are gain + distortion; a distortion finding appears in both sub-lists but
//! is counted once in the score. error_score = Σ weights / 10.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gateway::{Completion, FinishReason, Gateway, GatewayError, ModelRole};
use crate::prompts::{CLAIM_DECOMPOSE, CLAIM_MAP, ERROR_CLASSIFY, REPAIR_SUFFIX};

/// The eight error kinds, in taxonomy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    MissingClaim,
    SpecificityLost,
    NuanceLost,
    UnfactualAddition,
    OffTopicAddition,
    FactualityDistortion,
    MajorFidelityLoss,
    MinorFidelityLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    InformationLoss,
    InformationGain,
    Distortion,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 8] = [
        ErrorKind::MissingClaim,
        ErrorKind::SpecificityLost,
        ErrorKind::NuanceLost,
        ErrorKind::UnfactualAddition,
        ErrorKind::OffTopicAddition,
        ErrorKind::FactualityDistortion,
        ErrorKind::MajorFidelityLoss,
        ErrorKind::MinorFidelityLoss,
    ];

    /// Fixed severity weight of this kind.
    pub fn weight(self) -> u32 {
        match self {
            ErrorKind::MissingClaim => 2,
            ErrorKind::SpecificityLost => 1,
            ErrorKind::NuanceLost => 2,
            ErrorKind::UnfactualAddition => 4,
            ErrorKind::OffTopicAddition => 1,
            ErrorKind::FactualityDistortion => 4,
            ErrorKind::MajorFidelityLoss => 3,
            ErrorKind::MinorFidelityLoss => 1,
        }
    }

    pub fn category(self) -> ErrorCategory {
        match self {
            ErrorKind::MissingClaim | ErrorKind::SpecificityLost | ErrorKind::NuanceLost => {
                ErrorCategory::InformationLoss
            }
            ErrorKind::UnfactualAddition | ErrorKind::OffTopicAddition => {
                ErrorCategory::InformationGain
            }
            ErrorKind::FactualityDistortion
            | ErrorKind::MajorFidelityLoss
            | ErrorKind::MinorFidelityLoss => ErrorCategory::Distortion,
        }
    }

    /// The snake_case label used in judge output.
    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::MissingClaim => "missing_claim",
            ErrorKind::SpecificityLost => "specificity_lost",
            ErrorKind::NuanceLost => "nuance_lost",
            ErrorKind::UnfactualAddition => "unfactual_addition",
            ErrorKind::OffTopicAddition => "off_topic_addition",
            ErrorKind::FactualityDistortion => "factuality_distortion",
            ErrorKind::MajorFidelityLoss => "major_fidelity_loss",
            ErrorKind::MinorFidelityLoss => "minor_fidelity_loss",
        }
    }

    pub fn from_label(label: &str) -> Option<ErrorKind> {
        ErrorKind::ALL.into_iter().find(|k| k.label() == label)
    }
}

/// A smallest self-contained factual assertion from the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicClaim {
    pub claim_id: String,
    pub statement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<(usize, usize)>,
}

/// Where each claim landed in the rewrite. Every claim id appears in exactly
/// one of `mapped` / `unmapped_original`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimAlignment {
    /// (claim_id, rewrite excerpt) pairs.
    pub mapped: Vec<(String, String)>,
    pub unmapped_original: Vec<String>,
    pub unsupported_rewrite: Vec<String>,
}

/// One classified fidelity error. Weight and category derive from the kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorFinding {
    pub kind: ErrorKind,
    /// Claim id for loss/distortion findings, rewrite excerpt for additions.
    pub subject: String,
    pub rationale: String,
}

impl ErrorFinding {
    pub fn weight(&self) -> u32 {
        self.kind.weight()
    }

    pub fn category(&self) -> ErrorCategory {
        self.kind.category()
    }
}

/// Full output of one fidelity evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub claims: Vec<AtomicClaim>,
    pub alignment: ClaimAlignment,
    pub findings: Vec<ErrorFinding>,
    /// Σ finding weights / 10.
    pub error_score: f64,
    /// Findings with category in {InformationLoss, Distortion}.
    pub completeness_errors: Vec<ErrorFinding>,
    /// Findings with category in {InformationGain, Distortion}.
    pub entailment_errors: Vec<ErrorFinding>,
    /// Paraphrased excerpts, repair rounds, and other non-fatal notes.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Decompose,
    Map,
    Classify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Decompose => "claim decomposition",
            Stage::Map => "claim mapping",
            Stage::Classify => "error classification",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FidelityError {
    #[error("original text is empty")]
    EmptyOriginal,
    #[error("{stage} backend request failed: {source}")]
    Gateway {
        stage: Stage,
        #[source]
        source: GatewayError,
    },
    #[error("{stage}: judge refused or returned an unusable completion ({finish:?})")]
    BadCompletion { stage: Stage, finish: FinishReason },
    #[error("{stage}: unusable judge output after one repair round: {message}")]
    Parse { stage: Stage, message: String },
    #[error("error classification used unknown kind label {label:?}")]
    UnknownKind { label: String },
    #[error("claim decomposition produced no claims")]
    NoClaims,
    #[error("claim mapping requires a non-empty claim list")]
    NoClaimsToMap,
}

/// Exact integer weight sum; `error_score` is this over ten.
pub fn total_weight(findings: &[ErrorFinding]) -> u32 {
    findings.iter().map(|f| f.weight()).sum()
}

/// Splits off verbatim findings sub-lists and the weighted score. Pure.
pub fn score_findings(
    findings: &[ErrorFinding],
) -> (f64, Vec<ErrorFinding>, Vec<ErrorFinding>) {
    let total = total_weight(findings);
    let completeness = findings
        .iter()
        .filter(|f| {
            matches!(f.category(), ErrorCategory::InformationLoss | ErrorCategory::Distortion)
        })
        .cloned()
        .collect();
    let entailment = findings
        .iter()
        .filter(|f| {
            matches!(f.category(), ErrorCategory::InformationGain | ErrorCategory::Distortion)
        })
        .cloned()
        .collect();
    (f64::from(total) / 10.0, completeness, entailment)
}

/// Asks the fidelity judge to break `original` into atomic claims.
///
/// Returns the claims plus any warnings (a repair round is a warning).
pub fn decompose_claims(
    gateway: &Gateway,
    role: &ModelRole,
    original: &str,
) -> Result<(Vec<AtomicClaim>, Vec<String>), FidelityError> {
    if original.trim().is_empty() {
        return Err(FidelityError::EmptyOriginal);
    }
    let prompt = CLAIM_DECOMPOSE.fill(&[("ORIGINAL", original)]);
    let (claims, warnings) =
        judged_json::<ClaimsDoc>(gateway, role, Stage::Decompose, &prompt, |doc| {
            if doc.claims.is_empty() {
                return Err("empty claims list".into());
            }
            let mut seen = std::collections::HashSet::new();
            for entry in &doc.claims {
                if entry.statement.trim().is_empty() {
                    return Err(format!("claim {} has an empty statement", entry.id));
                }
                if !seen.insert(entry.id.clone()) {
                    return Err(format!("duplicate claim id {}", entry.id));
                }
            }
            Ok(doc
                .claims
                .into_iter()
                .map(|e| AtomicClaim { claim_id: e.id, statement: e.statement, source_span: None })
                .collect())
        })?;
    Ok((claims, warnings))
}

/// Asks the judge to align `claims` with `rewrite`.
///
/// The partition invariant (each claim id in exactly one of mapped /
/// unmapped_original) is enforced; a violating reply is treated as a parse
/// failure and repaired once. Excerpts that are not verbatim substrings of
/// the rewrite are tolerated as paraphrase with a warning.
pub fn map_claims(
    gateway: &Gateway,
    role: &ModelRole,
    claims: &[AtomicClaim],
    rewrite: &str,
) -> Result<(ClaimAlignment, Vec<String>), FidelityError> {
    if claims.is_empty() {
        return Err(FidelityError::NoClaimsToMap);
    }
    let claims_json = serde_json::to_string_pretty(
        &claims
            .iter()
            .map(|c| serde_json::json!({"id": c.claim_id, "statement": c.statement}))
            .collect::<Vec<_>>(),
    )
    .expect("claims serialize");
    let prompt = CLAIM_MAP.fill(&[("CLAIMS", &claims_json), ("REWRITE", rewrite)]);

    let (alignment, mut warnings) =
        judged_json::<MapDoc>(gateway, role, Stage::Map, &prompt, |doc| {
            let mut placed = std::collections::HashMap::new();
            for entry in &doc.mapped {
                *placed.entry(entry.claim_id.as_str()).or_insert(0) += 1;
            }
            for id in &doc.unmapped_original {
                *placed.entry(id.as_str()).or_insert(0) += 1;
            }
            for claim in claims {
                match placed.remove(claim.claim_id.as_str()) {
                    Some(1) => {}
                    Some(n) => {
                        return Err(format!("claim {} placed {n} times", claim.claim_id));
                    }
                    None => return Err(format!("claim {} not placed", claim.claim_id)),
                }
            }
            if let Some(unknown) = placed.keys().next() {
                return Err(format!("unknown claim id {unknown}"));
            }
            Ok(ClaimAlignment {
                mapped: doc.mapped.into_iter().map(|e| (e.claim_id, e.excerpt)).collect(),
                unmapped_original: doc.unmapped_original,
                unsupported_rewrite: doc.unsupported_rewrite,
            })
        })?;

    for (claim_id, excerpt) in &alignment.mapped {
        if !rewrite.contains(excerpt.as_str()) {
            warnings.push(format!(
                "excerpt for claim {claim_id} is not a verbatim substring of the rewrite"
            ));
        }
    }
    Ok((alignment, warnings))
}

/// Asks the judge for error findings over an alignment.
///
/// Coverage is part of the output contract: every unmapped claim needs a
/// loss-or-distortion finding and every unsupported excerpt an addition
/// finding; a reply violating it is repaired once, then errors. An unknown
/// kind label that survives repair is reported by name.
pub fn classify_errors(
    gateway: &Gateway,
    role: &ModelRole,
    alignment: &ClaimAlignment,
    original: &str,
    rewrite: &str,
) -> Result<(Vec<ErrorFinding>, Vec<String>), FidelityError> {
    let alignment_json = serde_json::to_string_pretty(&serde_json::json!({
        "mapped": alignment
            .mapped
            .iter()
            .map(|(id, ex)| serde_json::json!({"claim_id": id, "excerpt": ex}))
            .collect::<Vec<_>>(),
        "unmapped_original": alignment.unmapped_original,
        "unsupported_rewrite": alignment.unsupported_rewrite,
    }))
    .expect("alignment serialize");
    let prompt = ERROR_CLASSIFY.fill(&[
        ("ORIGINAL", original),
        ("REWRITE", rewrite),
        ("ALIGNMENT", &alignment_json),
    ]);

    // the last unknown label seen, to report it by name instead of as a
    // generic parse failure if repair does not fix it
    let unknown_label = std::cell::RefCell::new(None::<String>);
    let result = judged_json::<FindingsDoc>(gateway, role, Stage::Classify, &prompt, |doc| {
        let mut findings = Vec::with_capacity(doc.findings.len());
        for entry in doc.findings {
            let Some(kind) = ErrorKind::from_label(&entry.kind) else {
                *unknown_label.borrow_mut() = Some(entry.kind.clone());
                return Err(format!("unknown error kind label {:?}", entry.kind));
            };
            findings.push(ErrorFinding {
                kind,
                subject: entry.subject,
                rationale: entry.rationale,
            });
        }
        for claim_id in &alignment.unmapped_original {
            let covered = findings.iter().any(|f| {
                f.subject == *claim_id
                    && matches!(
                        f.category(),
                        ErrorCategory::InformationLoss | ErrorCategory::Distortion
                    )
            });
            if !covered {
                return Err(format!("unmapped claim {claim_id} received no finding"));
            }
        }
        for excerpt in &alignment.unsupported_rewrite {
            let covered = findings.iter().any(|f| {
                f.subject == *excerpt && f.category() == ErrorCategory::InformationGain
            });
            if !covered {
                return Err("unsupported excerpt received no addition finding".to_string());
            }
        }
        Ok(findings)
    });
    match result {
        Ok(ok) => Ok(ok),
        Err(FidelityError::Parse { .. }) if unknown_label.borrow().is_some() => {
            Err(FidelityError::UnknownKind { label: unknown_label.into_inner().unwrap() })
        }
        Err(e) => Err(e),
    }
}

/// Runs decompose, map, classify, and score as one evaluation.
///
/// The original must be non-empty; an empty rewrite is legitimate input (a
/// degenerate rewrite should surface as missing claims, not as a crash).
pub fn evaluate_fidelity(
    gateway: &Gateway,
    role: &ModelRole,
    original: &str,
    rewrite: &str,
) -> Result<FidelityReport, FidelityError> {
    let (claims, mut warnings) = decompose_claims(gateway, role, original)?;
    let (alignment, map_warnings) = map_claims(gateway, role, &claims, rewrite)?;
    warnings.extend(map_warnings);
    let (findings, classify_warnings) =
        classify_errors(gateway, role, &alignment, original, rewrite)?;
    warnings.extend(classify_warnings);
    let (error_score, completeness_errors, entailment_errors) = score_findings(&findings);
    Ok(FidelityReport {
        claims,
        alignment,
        findings,
        error_score,
        completeness_errors,
        entailment_errors,
        warnings,
    })
}

#[derive(Deserialize)]
struct ClaimsDoc {
    claims: Vec<ClaimEntry>,
}

#[derive(Deserialize)]
struct ClaimEntry {
    id: String,
    statement: String,
}

#[derive(Deserialize)]
struct MapDoc {
    #[serde(default)]
    mapped: Vec<MapEntry>,
    #[serde(default)]
    unmapped_original: Vec<String>,
    #[serde(default)]
    unsupported_rewrite: Vec<String>,
}

#[derive(Deserialize)]
struct MapEntry {
    claim_id: String,
    excerpt: String,
}

#[derive(Deserialize)]
struct FindingsDoc {
    findings: Vec<FindingEntry>,
}

#[derive(Deserialize)]
struct FindingEntry {
    kind: String,
    subject: String,
    #[serde(default)]
    rationale: String,
}

/// One judged request with a typed JSON reply: complete, parse, validate;
/// on any failure re-prompt once with the repair suffix, then error.
fn judged_json<D>(
    gateway: &Gateway,
    role: &ModelRole,
    stage: Stage,
    prompt: &str,
    mut validate: impl FnMut(D) -> Result<ParsedOf<D>, String>,
) -> Result<(ParsedOf<D>, Vec<String>), FidelityError>
where
    D: serde::de::DeserializeOwned + HasParsed,
{
    let completion = judged_completion(gateway, role, stage, prompt)?;
    let first_failure = match parse_reply::<D>(&completion.text).and_then(&mut validate) {
        Ok(value) => return Ok((value, Vec::new())),
        Err(message) => message,
    };

    let repair_prompt = format!(
        "{prompt}\n\n{}",
        REPAIR_SUFFIX.fill(&[("PROBLEM", first_failure.as_str())])
    );
    let completion = judged_completion(gateway, role, stage, &repair_prompt)?;
    match parse_reply::<D>(&completion.text).and_then(&mut validate) {
        Ok(value) => {
            Ok((value, vec![format!("{stage} needed a repair round: {first_failure}")]))
        }
        Err(message) => Err(FidelityError::Parse { stage, message }),
    }
}

/// Ties the parsed-document type to the validated output type so
/// `judged_json` can name it.
trait HasParsed {
    type Parsed;
}

type ParsedOf<D> = <D as HasParsed>::Parsed;

impl HasParsed for ClaimsDoc {
    type Parsed = Vec<AtomicClaim>;
}

impl HasParsed for MapDoc {
    type Parsed = ClaimAlignment;
}

impl HasParsed for FindingsDoc {
    type Parsed = Vec<ErrorFinding>;
}

fn judged_completion(
    gateway: &Gateway,
    role: &ModelRole,
    stage: Stage,
    prompt: &str,
) -> Result<Completion, FidelityError> {
    let completion = gateway
        .complete(role, prompt)
        .map_err(|source| FidelityError::Gateway { stage, source })?;
    if completion.finish_reason != FinishReason::Complete {
        return Err(FidelityError::BadCompletion { stage, finish: completion.finish_reason });
    }
    Ok(completion)
}

/// Parses a reply as JSON, tolerating prose around one JSON object.
fn parse_reply<D: serde::de::DeserializeOwned>(reply: &str) -> Result<D, String> {
    let trimmed = reply.trim();
    match serde_json::from_str(trimmed) {
        Ok(doc) => Ok(doc),
        Err(first_err) => {
            let start = trimmed.find('{');
            let end = trimmed.rfind('}');
            if let (Some(start), Some(end)) = (start, end) {
                if start < end {
                    if let Ok(doc) = serde_json::from_str(&trimmed[start..=end]) {
                        return Ok(doc);
                    }
                }
            }
            Err(first_err.to_string())
        }
    }
}
