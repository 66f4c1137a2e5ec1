//! Readability autoeval: rate one text on an integer 1-10 scale.
//!
//! The judge scores the ten integer labels by option likelihood; the rating
//! is the argmax with ties broken to the LOWER integer (under-reporting
//! readability rather than over-reporting it), and the confidence is the
//! normalized probability mass at the chosen label. Backends that cannot
//! score options fall back to one constrained generation parsed strictly as
//! a single integer, reported with confidence 1.0 and a fallback flag.

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, ModelRole, OptionDistribution};
use crate::prompts::PromptAsset;

/// One readability judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityRating {
    /// Integer score in [1, 10]; higher reads easier.
    pub score: u8,
    /// Probability mass at `score`, in (0, 1].
    pub confidence: f64,
    pub distribution: OptionDistribution,
    /// True when the rating came from the generate-and-parse fallback.
    pub via_fallback: bool,
    /// SHA-256 of the rubric template that produced this rating.
    pub rubric_hash: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ReadabilityError {
    #[error("text to rate is empty")]
    EmptyText,
    #[error("readability backend request failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("fallback rating reply is not a single integer in [1,10]: {reply:?}")]
    UnparseableFallback { reply: String },
}

/// The ten candidate labels, ascending.
fn score_labels() -> Vec<String> {
    (1..=10).map(|i| i.to_string()).collect()
}

/// Rates `text` with the readability judge bound to `role`, using `rubric`.
pub fn rate_readability(
    gateway: &Gateway,
    role: &ModelRole,
    rubric: &PromptAsset,
    text: &str,
) -> Result<ReadabilityRating, ReadabilityError> {
    if text.trim().is_empty() {
        return Err(ReadabilityError::EmptyText);
    }
    let prompt = rubric.fill(&[("TEXT", text)]);
    let labels = score_labels();

    match gateway.score_options(role, &prompt, &labels) {
        Ok(distribution) => {
            // argmax returns the earliest index on ties, which over the
            // ascending label list is exactly the lower-integer tie-break
            let index = distribution.argmax();
            Ok(ReadabilityRating {
                score: (index + 1) as u8,
                confidence: distribution.probabilities()[index],
                distribution,
                via_fallback: false,
                rubric_hash: rubric.sha256(),
            })
        }
        Err(GatewayError::Capability(_)) => rate_via_fallback(gateway, role, rubric, &prompt),
        Err(e) => Err(e.into()),
    }
}

/// One plain generation, parsed strictly: the whole trimmed reply must be an
/// integer in [1, 10].
fn rate_via_fallback(
    gateway: &Gateway,
    role: &ModelRole,
    rubric: &PromptAsset,
    prompt: &str,
) -> Result<ReadabilityRating, ReadabilityError> {
    let completion = gateway.complete(role, prompt)?;
    let reply = completion.text.trim();
    let score: u8 = reply
        .parse()
        .ok()
        .filter(|s| (1..=10).contains(s))
        .ok_or_else(|| ReadabilityError::UnparseableFallback { reply: completion.text.clone() })?;
    Ok(ReadabilityRating {
        score,
        confidence: 1.0,
        distribution: OptionDistribution::point_mass(score_labels(), (score - 1) as usize),
        via_fallback: true,
        rubric_hash: rubric.sha256(),
    })
}

/// Readability gain of `simplified` over `original`: rate(simplified) minus
/// rate(original), an integer-valued real in [-9, 9].
pub fn readability_delta(
    gateway: &Gateway,
    role: &ModelRole,
    rubric: &PromptAsset,
    original: &str,
    simplified: &str,
) -> Result<f64, ReadabilityError> {
    if original.trim().is_empty() || simplified.trim().is_empty() {
        return Err(ReadabilityError::EmptyText);
    }
    let after = rate_readability(gateway, role, rubric, simplified)?;
    let before = rate_readability(gateway, role, rubric, original)?;
    Ok(after.score as f64 - before.score as f64)
}
