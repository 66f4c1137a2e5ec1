//! Backend-agnostic access to text-generation models.
//!
//! A [`Gateway`] routes requests from pipeline roles to [`Backend`]
//! implementations, with bounded retries for transient failures and an
//! optional content-addressed record/replay cache. With a frozen cache and
//! `offline` set, every pipeline output is bit-identical across runs and no
//! backend is ever called.
//!
//! Two request shapes exist: free-text completion and option-likelihood
//! scoring. Option scoring returns a normalized [`OptionDistribution`]
//! (softmax over the raw log-scores the backend reports); backends without
//! that capability surface [`GatewayError::Capability`] so callers can fall
//! back to generate-and-parse.

mod cache;
mod mock;

pub use cache::{CacheError, CachedResponse, TranscriptCache};
pub use mock::{Matcher, MockBackend, MockCall, MockCallKind, MockRule, ScriptError, ScriptResponse};

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// The four pipeline roles a model can be bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Simplifier,
    ReadabilityJudge,
    FidelityJudge,
    PromptImprover,
}

/// Decoding parameters sent with every request and folded into cache keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DecodeParams {
    /// Temperature-0 decoding, the default for judge roles.
    pub fn deterministic() -> Self {
        DecodeParams { temperature: 0.0, max_output_tokens: 2048, seed: None }
    }
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self::deterministic()
    }
}

/// Binds a role to a backend and decode parameters for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRole {
    pub kind: RoleKind,
    pub backend_id: String,
    pub decode: DecodeParams,
}

impl ModelRole {
    pub fn new(kind: RoleKind, backend_id: impl Into<String>) -> Self {
        ModelRole { kind, backend_id: backend_id.into(), decode: DecodeParams::deterministic() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Complete,
    Truncated,
    Refused,
    BackendError,
}

/// One completed generation, with the content hash that addresses its
/// transcript in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub finish_reason: FinishReason,
    pub transcript_key: String,
}

/// Normalized likelihoods over a fixed option list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionDistribution {
    options: Vec<String>,
    probabilities: Vec<f64>,
}

impl OptionDistribution {
    /// Softmax the raw log-scores over the given options.
    ///
    /// Invariant under adding any constant to all scores; probabilities sum
    /// to 1 within 1e-9.
    pub fn from_log_scores(options: Vec<String>, log_scores: &[f64]) -> Self {
        assert_eq!(options.len(), log_scores.len(), "options/scores length mismatch");
        assert!(!options.is_empty(), "empty option list");
        let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probabilities = exps.iter().map(|e| e / total).collect();
        OptionDistribution { options, probabilities }
    }

    /// All mass on one option; used when a score comes from parsing a plain
    /// generation instead of option likelihoods.
    pub fn point_mass(options: Vec<String>, index: usize) -> Self {
        assert!(index < options.len(), "point mass index out of range");
        let probabilities = (0..options.len()).map(|i| if i == index { 1.0 } else { 0.0 }).collect();
        OptionDistribution { options, probabilities }
    }

    pub fn options(&self) -> &[String] {
        &self.options
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Index of the most likely option; ties go to the earliest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate().skip(1) {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// Outcome a backend reports for a completion request.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplyOutcome {
    Complete(String),
    Truncated(String),
    Refused,
}

/// Errors a backend may surface. Only `Transient` is retried.
#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend lacks capability: {0}")]
    Capability(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

/// A text-generation backend. Implementations must be safe to share across
/// threads; the gateway issues concurrent in-flight requests.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<ReplyOutcome, BackendError>;

    fn score_options(
        &self,
        request: &GenerationRequest,
        options: &[String],
    ) -> Result<Vec<f64>, BackendError>;
}

/// The request material a backend sees (also the cache-key material).
#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub backend_id: &'a str,
    pub decode: &'a DecodeParams,
    pub prompt: &'a str,
}

/// Bounded exponential backoff for transient failures. Refusals are
/// deterministic content outcomes and are never retried.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(200) }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("no backend registered under id {0:?}")]
    UnknownBackend(String),
    #[error("cache miss in offline mode (key {key})")]
    CacheMiss { key: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("backend unreachable after {attempts} attempts: {last_error}")]
    BackendUnreachable { attempts: u32, last_error: String },
    #[error("option scoring unavailable: {0}")]
    Capability(String),
    #[error("malformed backend reply: {0}")]
    BadReply(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// Routes requests to backends through the cache and retry policy.
pub struct Gateway {
    backends: BTreeMap<String, Arc<dyn Backend>>,
    cache: Option<TranscriptCache>,
    offline: bool,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder::default()
    }

    /// Complete `prompt` under `role`. Cache hits replay the recorded
    /// completion bit-for-bit without touching the backend.
    pub fn complete(&self, role: &ModelRole, prompt: &str) -> Result<Completion, GatewayError> {
        let canonical = canonical_request("complete", role, prompt, None);
        let key = request_key(&canonical);

        if let Some(cache) = &self.cache {
            if let Some(cached) = cache.lookup(&key)? {
                return match cached {
                    CachedResponse::Completion { text, finish_reason } => {
                        Ok(Completion { text, finish_reason, transcript_key: key })
                    }
                    CachedResponse::OptionScores { .. } => Err(GatewayError::BadReply(
                        "cached record is option scores, expected completion".into(),
                    )),
                };
            }
        }
        if self.offline {
            return Err(GatewayError::CacheMiss { key });
        }

        let backend = self.backend(&role.backend_id)?;
        let request =
            GenerationRequest { backend_id: &role.backend_id, decode: &role.decode, prompt };
        let outcome = self.with_retries(|| backend.complete(&request))?;

        let (text, finish_reason) = match outcome {
            ReplyOutcome::Complete(text) => {
                if text.is_empty() {
                    return Err(GatewayError::BadReply(
                        "empty text with finish_reason complete".into(),
                    ));
                }
                (text, FinishReason::Complete)
            }
            ReplyOutcome::Truncated(text) => (text, FinishReason::Truncated),
            ReplyOutcome::Refused => (String::new(), FinishReason::Refused),
        };

        if let Some(cache) = &self.cache {
            cache.store(
                &key,
                &canonical,
                &CachedResponse::Completion { text: text.clone(), finish_reason },
            )?;
        }
        Ok(Completion { text, finish_reason, transcript_key: key })
    }

    /// Score the given options under `role`, returning the softmax-normalized
    /// distribution over exactly those options.
    pub fn score_options(
        &self,
        role: &ModelRole,
        prompt: &str,
        options: &[String],
    ) -> Result<OptionDistribution, GatewayError> {
        if options.is_empty() {
            return Err(GatewayError::InvalidOptions("option list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for opt in options {
            if !seen.insert(opt.as_str()) {
                return Err(GatewayError::InvalidOptions(format!("duplicate option {opt:?}")));
            }
        }

        let canonical = canonical_request("score_options", role, prompt, Some(options));
        let key = request_key(&canonical);

        if let Some(cache) = &self.cache {
            if let Some(cached) = cache.lookup(&key)? {
                return match cached {
                    CachedResponse::OptionScores { log_scores } => {
                        check_score_len(&log_scores, options)?;
                        Ok(OptionDistribution::from_log_scores(options.to_vec(), &log_scores))
                    }
                    CachedResponse::Completion { .. } => Err(GatewayError::BadReply(
                        "cached record is a completion, expected option scores".into(),
                    )),
                };
            }
        }
        if self.offline {
            return Err(GatewayError::CacheMiss { key });
        }

        let backend = self.backend(&role.backend_id)?;
        let request =
            GenerationRequest { backend_id: &role.backend_id, decode: &role.decode, prompt };
        let log_scores = self.with_retries(|| backend.score_options(&request, options))?;
        check_score_len(&log_scores, options)?;

        if let Some(cache) = &self.cache {
            cache.store(
                &key,
                &canonical,
                &CachedResponse::OptionScores { log_scores: log_scores.clone() },
            )?;
        }
        Ok(OptionDistribution::from_log_scores(options.to_vec(), &log_scores))
    }

    /// The cache key a request would resolve to, without issuing it.
    pub fn key_for_complete(&self, role: &ModelRole, prompt: &str) -> String {
        request_key(&canonical_request("complete", role, prompt, None))
    }

    pub fn is_offline(&self) -> bool {
        self.offline
    }

    fn backend(&self, id: &str) -> Result<Arc<dyn Backend>, GatewayError> {
        self.backends.get(id).cloned().ok_or_else(|| GatewayError::UnknownBackend(id.to_string()))
    }

    fn with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<T, GatewayError> {
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts {
            match call() {
                Ok(value) => return Ok(value),
                Err(BackendError::Transient(msg)) => {
                    last_error = msg;
                    if attempt < self.retry.max_attempts {
                        let backoff = self.retry.base_delay * 2u32.saturating_pow(attempt - 1);
                        if !backoff.is_zero() {
                            std::thread::sleep(backoff);
                        }
                    }
                }
                Err(BackendError::Capability(msg)) => return Err(GatewayError::Capability(msg)),
                Err(BackendError::Fatal(msg)) => return Err(GatewayError::Backend(msg)),
            }
        }
        Err(GatewayError::BackendUnreachable { attempts: self.retry.max_attempts, last_error })
    }
}

#[derive(Default)]
pub struct GatewayBuilder {
    backends: BTreeMap<String, Arc<dyn Backend>>,
    cache: Option<TranscriptCache>,
    offline: bool,
    retry: Option<RetryPolicy>,
}

impl GatewayBuilder {
    pub fn backend(mut self, id: impl Into<String>, backend: Arc<dyn Backend>) -> Self {
        self.backends.insert(id.into(), backend);
        self
    }

    pub fn cache(mut self, cache: TranscriptCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Cache-only mode: a miss is an error and no backend is called.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = Some(retry);
        self
    }

    pub fn build(self) -> Gateway {
        Gateway {
            backends: self.backends,
            cache: self.cache,
            offline: self.offline,
            retry: self.retry.unwrap_or_default(),
        }
    }
}

fn check_score_len(log_scores: &[f64], options: &[String]) -> Result<(), GatewayError> {
    if log_scores.len() != options.len() {
        return Err(GatewayError::BadReply(format!(
            "backend returned {} scores for {} options",
            log_scores.len(),
            options.len()
        )));
    }
    Ok(())
}

/// Canonical JSON for a request; key material for the transcript cache.
/// serde_json orders map keys, so equal requests canonicalize identically.
fn canonical_request(
    kind: &str,
    role: &ModelRole,
    prompt: &str,
    options: Option<&[String]>,
) -> String {
    let mut value = serde_json::json!({
        "kind": kind,
        "backend_id": role.backend_id,
        "temperature": role.decode.temperature,
        "max_output_tokens": role.decode.max_output_tokens,
        "seed": role.decode.seed,
        "prompt": prompt,
    });
    if let Some(options) = options {
        value["options"] = serde_json::json!(options);
    }
    value.to_string()
}

fn request_key(canonical: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(canonical.as_bytes()))
}
