//! Prompt refinement loop: score, rank, improve, repeat until plateau.
//!
//! Each iteration simplifies the whole corpus under the current candidate,
//! rates every rewrite for readability and fidelity, folds the per-text
//! results into one prompt score (mean readability minus mean error), tracks
//! the best candidates on a capacity-bounded leaderboard, and asks the
//! improver role for the next candidate using the worst-scoring texts as
//! feedback. The loop stops at max_iterations or when the best score has
//! improved by less than epsilon over the trailing window.
//!
//! Determinism: per-text evaluation fans out in parallel but aggregation is
//! ordered by text id, so a frozen transcript cache makes the whole loop
//! bit-reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::fidelity::{self, ErrorFinding};
use crate::gateway::{FinishReason, Gateway, ModelRole};
use crate::prompts::{PromptAsset, PROMPT_IMPROVE, READABILITY_RUBRIC};
use crate::readability;
use crate::simplifier::{self, FewShot, PromptCandidate, PromptOrigin};

/// Default word-count ceiling for a "short input" few-shot example.
pub const DEFAULT_SHORT_INPUT_WORDS: usize = 40;

/// Gateway plus the role bindings one refinement run uses.
pub struct EvalContext<'a> {
    pub gateway: &'a Gateway,
    pub simplifier: ModelRole,
    pub readability_judge: ModelRole,
    pub fidelity_judge: ModelRole,
    pub improver: ModelRole,
    pub rubric: PromptAsset,
}

impl<'a> EvalContext<'a> {
    /// All four roles on one backend, with the shipped rubric.
    pub fn single_backend(gateway: &'a Gateway, backend_id: &str) -> Self {
        use crate::gateway::RoleKind;
        EvalContext {
            gateway,
            simplifier: ModelRole::new(RoleKind::Simplifier, backend_id),
            readability_judge: ModelRole::new(RoleKind::ReadabilityJudge, backend_id),
            fidelity_judge: ModelRole::new(RoleKind::FidelityJudge, backend_id),
            improver: ModelRole::new(RoleKind::PromptImprover, backend_id),
            rubric: READABILITY_RUBRIC,
        }
    }
}

/// One text's evaluation under one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTextEval {
    pub text_id: String,
    pub readability: f64,
    pub error_score: f64,
    pub rewrite: String,
    pub findings: Vec<ErrorFinding>,
    /// True when this text got the worst-case penalty instead of real
    /// judge scores.
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl PerTextEval {
    /// The quantity feedback selection minimizes.
    pub fn combined(&self) -> f64 {
        self.readability - self.error_score
    }
}

/// A candidate's score over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptScore {
    pub prompt_id: String,
    pub mean_readability: f64,
    pub mean_error: f64,
    /// mean_readability − mean_error.
    pub score: f64,
    /// Ascending text-id order; the deterministic reduction base.
    pub per_text: Vec<PerTextEval>,
}

/// Folds per-text results into a [`PromptScore`]; the id-ordered reduction
/// makes the result independent of evaluation order.
pub fn aggregate_score(prompt_id: impl Into<String>, mut per_text: Vec<PerTextEval>) -> PromptScore {
    assert!(!per_text.is_empty(), "cannot aggregate zero texts");
    per_text.sort_by(|a, b| a.text_id.cmp(&b.text_id));
    let n = per_text.len() as f64;
    let mean_readability = per_text.iter().map(|e| e.readability).sum::<f64>() / n;
    let mean_error = per_text.iter().map(|e| e.error_score).sum::<f64>() / n;
    PromptScore {
        prompt_id: prompt_id.into(),
        mean_readability,
        mean_error,
        score: mean_readability - mean_error,
        per_text,
    }
}

/// Capacity-bounded, score-sorted record of the best candidates seen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Leaderboard {
    capacity: usize,
    entries: Vec<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub iteration: u32,
    pub candidate: PromptCandidate,
    pub score: PromptScore,
}

impl Leaderboard {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "leaderboard needs capacity");
        Leaderboard { capacity, entries: Vec::new() }
    }

    /// Inserts and re-ranks: score descending, ties to the earlier
    /// iteration, then to the smaller prompt id.
    pub fn insert(&mut self, entry: LeaderboardEntry) {
        self.entries.push(entry);
        self.entries.sort_by(|a, b| {
            b.score
                .score
                .total_cmp(&a.score.score)
                .then(a.iteration.cmp(&b.iteration))
                .then(a.candidate.prompt_id.cmp(&b.candidate.prompt_id))
        });
        self.entries.truncate(self.capacity);
    }

    pub fn entries(&self) -> &[LeaderboardEntry] {
        &self.entries
    }

    pub fn best(&self) -> Option<&LeaderboardEntry> {
        self.entries.first()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn find(&self, prompt_id: &str) -> Option<&LeaderboardEntry> {
        self.entries.iter().find(|e| e.candidate.prompt_id == prompt_id)
    }
}

/// Loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub max_iterations: u32,
    /// Trailing window W for the plateau rule.
    pub plateau_window: u32,
    /// Minimum best-score improvement over the window to keep going.
    pub plateau_epsilon: f64,
    pub leaderboard_capacity: usize,
    /// How many worst texts the improver sees.
    pub feedback_k: usize,
    pub rng_seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iterations: 20,
            plateau_window: 3,
            plateau_epsilon: 0.01,
            leaderboard_capacity: 10,
            feedback_k: 3,
            rng_seed: 0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if self.max_iterations == 0 {
            return Err(RefineError::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.plateau_window == 0 || self.plateau_window > self.max_iterations {
            return Err(RefineError::InvalidConfig(
                "plateau_window must be in [1, max_iterations]".into(),
            ));
        }
        if !self.plateau_epsilon.is_finite() || self.plateau_epsilon < 0.0 {
            return Err(RefineError::InvalidConfig("plateau_epsilon must be ≥ 0".into()));
        }
        if self.leaderboard_capacity == 0 {
            return Err(RefineError::InvalidConfig("leaderboard_capacity must be ≥ 1".into()));
        }
        if self.feedback_k == 0 {
            return Err(RefineError::InvalidConfig("feedback_k must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Why the loop ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Plateau,
    /// Scoring failed outright; leaderboard and log hold the progress made.
    ScoreError { message: String },
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub prompt_id: String,
    /// None when this slot was consumed by a failed proposal.
    pub score: Option<f64>,
    pub best_so_far: f64,
    /// The improver returned the current prompt unchanged.
    pub stagnant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
}

/// Everything a refinement run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub leaderboard: Leaderboard,
    pub log: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error("corpus has no texts")]
    EmptyCorpus,
    #[error("invalid refinement config: {0}")]
    InvalidConfig(String),
    #[error("every text failed evaluation; first failure: {first_failure}")]
    AllTextsFailed { first_failure: String },
    #[error("improver output unusable: {0}")]
    Propose(String),
    #[error("leaderboard is empty")]
    EmptyLeaderboard,
    #[error("no leaderboard entry has prompt id {0:?}")]
    UnknownPick(String),
}

/// Scores one candidate over the corpus: simplify, rate, judge fidelity per
/// text in parallel, then aggregate in id order.
///
/// A text whose pipeline fails anywhere contributes the worst case instead
/// of being dropped (readability 1, error = all its claims gone missing);
/// dropping would let a crashing prompt inflate its score.
pub fn score_prompt(
    ctx: &EvalContext,
    candidate: &PromptCandidate,
    corpus: &Corpus,
) -> Result<PromptScore, RefineError> {
    if corpus.excerpts().is_empty() {
        return Err(RefineError::EmptyCorpus);
    }
    let per_text: Vec<PerTextEval> = corpus
        .excerpts()
        .par_iter()
        .map(|excerpt| evaluate_one(ctx, candidate, &excerpt.id, &excerpt.original_text))
        .collect();

    if per_text.iter().all(|e| e.failed) {
        let first_failure = per_text
            .first()
            .and_then(|e| e.failure.clone())
            .unwrap_or_else(|| "unknown".into());
        return Err(RefineError::AllTextsFailed { first_failure });
    }
    Ok(aggregate_score(candidate.prompt_id.clone(), per_text))
}

fn evaluate_one(
    ctx: &EvalContext,
    candidate: &PromptCandidate,
    text_id: &str,
    original: &str,
) -> PerTextEval {
    match try_evaluate_one(ctx, candidate, text_id, original) {
        Ok(eval) => eval,
        Err(failure) => PerTextEval {
            text_id: text_id.to_string(),
            readability: 1.0,
            error_score: worst_case_error(ctx, original),
            rewrite: String::new(),
            findings: Vec::new(),
            failed: true,
            failure: Some(failure),
        },
    }
}

fn try_evaluate_one(
    ctx: &EvalContext,
    candidate: &PromptCandidate,
    text_id: &str,
    original: &str,
) -> Result<PerTextEval, String> {
    let rewrite = simplifier::simplify(ctx.gateway, &ctx.simplifier, candidate, text_id, original)
        .map_err(|e| format!("simplify: {e}"))?;
    let rating =
        readability::rate_readability(ctx.gateway, &ctx.readability_judge, &ctx.rubric, &rewrite.text)
            .map_err(|e| format!("readability: {e}"))?;
    let report =
        fidelity::evaluate_fidelity(ctx.gateway, &ctx.fidelity_judge, original, &rewrite.text)
            .map_err(|e| format!("fidelity: {e}"))?;
    Ok(PerTextEval {
        text_id: text_id.to_string(),
        readability: f64::from(rating.score),
        error_score: report.error_score,
        rewrite: rewrite.text,
        findings: report.findings,
        failed: false,
        failure: None,
    })
}

/// Worst-case error for a failed text: every claim of the original counted
/// as missing. Falls back to a sentence-count proxy when even decomposition
/// is unavailable.
fn worst_case_error(ctx: &EvalContext, original: &str) -> f64 {
    let n_claims = match fidelity::decompose_claims(ctx.gateway, &ctx.fidelity_judge, original) {
        Ok((claims, _)) => claims.len(),
        Err(_) => sentence_count(original),
    };
    f64::from(crate::fidelity::ErrorKind::MissingClaim.weight()) * n_claims as f64 / 10.0
}

fn sentence_count(text: &str) -> usize {
    text.split(['.', '!', '?']).filter(|s| !s.trim().is_empty()).count().max(1)
}

/// The k texts with the lowest (readability − error) score, rewrites and
/// findings attached, ties broken by text id. k is clipped to the corpus.
pub fn select_feedback(per_text: &[PerTextEval], k: usize) -> Vec<&PerTextEval> {
    assert!(k >= 1, "feedback selection needs k ≥ 1");
    let mut ranked: Vec<&PerTextEval> = per_text.iter().collect();
    ranked.sort_by(|a, b| a.combined().total_cmp(&b.combined()).then(a.text_id.cmp(&b.text_id)));
    ranked.truncate(k);
    ranked
}

/// Renders a feedback bundle for the improver prompt.
pub fn render_feedback(selected: &[&PerTextEval], corpus: &Corpus) -> String {
    let mut out = String::new();
    for eval in selected {
        let original = corpus
            .excerpt(&eval.text_id)
            .map(|e| e.original_text.as_str())
            .unwrap_or("(original unavailable)");
        out.push_str(&format!(
            "### text {} (readability {:.1}, fidelity error {:.2})\n",
            eval.text_id, eval.readability, eval.error_score
        ));
        out.push_str("ORIGINAL:\n");
        out.push_str(original);
        out.push('\n');
        if eval.failed {
            out.push_str(&format!(
                "REWRITE: evaluation failed ({})\n",
                eval.failure.as_deref().unwrap_or("unknown")
            ));
        } else {
            out.push_str("REWRITE:\n");
            out.push_str(&eval.rewrite);
            out.push('\n');
        }
        if !eval.findings.is_empty() {
            out.push_str("FINDINGS:\n");
            for finding in &eval.findings {
                out.push_str(&format!(
                    "- {} on {:?}: {}\n",
                    finding.kind.label(),
                    finding.subject,
                    finding.rationale
                ));
            }
        }
        out.push('\n');
    }
    out
}

fn render_history(log: &[IterationRecord]) -> String {
    let mut out = String::new();
    for record in log {
        match record.score {
            Some(score) => out.push_str(&format!(
                "iteration {}: prompt {} scored {:.4}\n",
                record.iteration, record.prompt_id, score
            )),
            None => out.push_str(&format!(
                "iteration {}: proposal {} was skipped\n",
                record.iteration, record.prompt_id
            )),
        }
    }
    out
}

/// A proposed next candidate.
pub struct Proposal {
    pub candidate: PromptCandidate,
    /// Instructions identical to the current candidate's.
    pub stagnant: bool,
}

/// Asks the improver for the next candidate's instructions.
///
/// The reply must carry the new prompt between the `<<<PROMPT>>>` and
/// `<<<END>>>` markers. Few-shots carry over unchanged; the improver only
/// rewrites instructions.
pub fn propose_prompt(
    ctx: &EvalContext,
    current: &PromptCandidate,
    feedback: &str,
    history: &str,
    next_iteration: u32,
) -> Result<Proposal, RefineError> {
    let prompt = PROMPT_IMPROVE.fill(&[
        ("CURRENT_PROMPT", current.instructions.as_str()),
        ("HISTORY", history),
        ("FEEDBACK", feedback),
    ]);
    let completion = ctx
        .gateway
        .complete(&ctx.improver, &prompt)
        .map_err(|e| RefineError::Propose(e.to_string()))?;
    if completion.finish_reason != FinishReason::Complete {
        return Err(RefineError::Propose(format!(
            "improver finished with {:?}",
            completion.finish_reason
        )));
    }
    let instructions = extract_marked(&completion.text)
        .ok_or_else(|| RefineError::Propose("reply lacks <<<PROMPT>>> … <<<END>>> markers".into()))?;
    if instructions.trim().is_empty() {
        return Err(RefineError::Propose("improver returned an empty prompt".into()));
    }
    let stagnant = instructions.trim() == current.instructions.trim();
    let candidate = PromptCandidate {
        prompt_id: format!("p{next_iteration:04}"),
        instructions: instructions.trim().to_string(),
        few_shots: current.few_shots.clone(),
        origin: PromptOrigin::Improved { iteration: next_iteration },
    };
    Ok(Proposal { candidate, stagnant })
}

fn extract_marked(reply: &str) -> Option<&str> {
    let start = reply.find("<<<PROMPT>>>")? + "<<<PROMPT>>>".len();
    let rest = &reply[start..];
    let end = rest.find("<<<END>>>")?;
    Some(&rest[..end])
}

/// Runs the full loop from `seed`.
pub fn run_refinement(
    ctx: &EvalContext,
    seed: PromptCandidate,
    corpus: &Corpus,
    config: &RefineConfig,
) -> Result<RefineOutcome, RefineError> {
    config.validate()?;
    seed.validate().map_err(|e| RefineError::InvalidConfig(e.to_string()))?;
    if corpus.excerpts().is_empty() {
        return Err(RefineError::EmptyCorpus);
    }

    let mut leaderboard = Leaderboard::new(config.leaderboard_capacity);
    let mut log: Vec<IterationRecord> = Vec::new();
    // best-so-far after each counted iteration; the plateau rule compares
    // positions i and i−W of this history
    let mut best_history: Vec<f64> = Vec::new();
    let mut candidate = seed;
    let mut stagnant = false;
    let mut iteration: u32 = 0;

    let stop_reason = 'run: loop {
        iteration += 1;
        let score = match score_prompt(ctx, &candidate, corpus) {
            Ok(score) => score,
            Err(e) => break 'run StopReason::ScoreError { message: e.to_string() },
        };
        let best = best_history
            .last()
            .copied()
            .map_or(score.score, |prev| prev.max(score.score));
        best_history.push(best);
        log.push(IterationRecord {
            iteration,
            prompt_id: candidate.prompt_id.clone(),
            score: Some(score.score),
            best_so_far: best,
            stagnant,
            stop_reason: None,
        });
        leaderboard.insert(LeaderboardEntry {
            iteration,
            candidate: candidate.clone(),
            score: score.clone(),
        });

        if iteration >= config.max_iterations {
            break 'run StopReason::MaxIterations;
        }
        let w = config.plateau_window as usize;
        let i = best_history.len();
        if i > w && best_history[i - 1] - best_history[i - 1 - w] < config.plateau_epsilon {
            break 'run StopReason::Plateau;
        }

        // propose the next candidate; a failed proposal consumes iteration
        // slots without scoring anything
        let feedback = render_feedback(&select_feedback(&score.per_text, config.feedback_k), corpus);
        loop {
            let next_iteration = iteration + 1;
            match propose_prompt(ctx, &candidate, &feedback, &render_history(&log), next_iteration)
            {
                Ok(proposal) => {
                    candidate = proposal.candidate;
                    stagnant = proposal.stagnant;
                    break;
                }
                Err(_) => {
                    iteration += 1;
                    let best = best_history.last().copied().unwrap_or(f64::NEG_INFINITY);
                    best_history.push(best);
                    log.push(IterationRecord {
                        iteration,
                        prompt_id: format!("p{iteration:04}"),
                        score: None,
                        best_so_far: best,
                        stagnant: false,
                        stop_reason: None,
                    });
                    if iteration >= config.max_iterations {
                        break 'run StopReason::MaxIterations;
                    }
                }
            }
        }
    };

    if let Some(last) = log.last_mut() {
        last.stop_reason = Some(stop_reason.clone());
    }
    Ok(RefineOutcome { leaderboard, log, stop_reason })
}

/// A scored candidate few-shot pair for final prompt assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotPoolEntry {
    pub text_id: String,
    pub input: String,
    pub output: String,
    pub readability: f64,
    pub error_score: f64,
}

impl ShotPoolEntry {
    fn combined(&self) -> f64 {
        self.readability - self.error_score
    }
}

/// Builds a few-shot pool from a prompt score's successful per-text results.
pub fn shot_pool(corpus: &Corpus, score: &PromptScore) -> Vec<ShotPoolEntry> {
    score
        .per_text
        .iter()
        .filter(|e| !e.failed)
        .filter_map(|e| {
            corpus.excerpt(&e.text_id).map(|excerpt| ShotPoolEntry {
                text_id: e.text_id.clone(),
                input: excerpt.original_text.clone(),
                output: e.rewrite.clone(),
                readability: e.readability,
                error_score: e.error_score,
            })
        })
        .collect()
}

/// Picks the final candidate (top-ranked, or `pick` to override) and appends
/// up to `n_shots` short-input examples from the pool, best scores first.
///
/// Returns the assembled candidate plus warnings (a thin pool is a warning,
/// not an error).
pub fn select_final(
    leaderboard: &Leaderboard,
    pool: &[ShotPoolEntry],
    n_shots: usize,
    short_word_limit: usize,
    pick: Option<&str>,
) -> Result<(PromptCandidate, Vec<String>), RefineError> {
    let entry = match pick {
        Some(prompt_id) => leaderboard
            .find(prompt_id)
            .ok_or_else(|| RefineError::UnknownPick(prompt_id.to_string()))?,
        None => leaderboard.best().ok_or(RefineError::EmptyLeaderboard)?,
    };

    let mut short: Vec<&ShotPoolEntry> = pool
        .iter()
        .filter(|e| e.input.split_whitespace().count() <= short_word_limit)
        .collect();
    short.sort_by(|a, b| {
        b.combined().total_cmp(&a.combined()).then(a.text_id.cmp(&b.text_id))
    });
    short.truncate(n_shots);

    let mut warnings = Vec::new();
    if short.len() < n_shots {
        warnings.push(format!(
            "few-shot pool has only {} short inputs of the {} requested",
            short.len(),
            n_shots
        ));
    }

    let mut candidate = entry.candidate.clone();
    candidate.few_shots.extend(short.iter().map(|e| FewShot {
        input: e.input.clone(),
        output: e.output.clone(),
    }));
    candidate.origin = PromptOrigin::Manual;
    Ok((candidate, warnings))
}
