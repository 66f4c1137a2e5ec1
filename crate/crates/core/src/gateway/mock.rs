//! Scripted in-process backend for tests and offline pipeline runs.
//!
//! Behavior is a rule list evaluated top-down: the first live rule whose
//! matcher accepts the prompt fires. Rules may carry a use budget; an
//! exhausted rule is skipped, which is how scripts express sequences like
//! "fail once, then answer". Every invocation is appended to a synchronized
//! call log so tests can assert exact attempt counts.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, GenerationRequest, ReplyOutcome};

/// Prompt matcher. `Pattern` is a glob where `*` matches any substring
/// (including empty); everything else is literal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Literal(String),
    Pattern(String),
}

impl Matcher {
    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Literal(expected) => prompt == expected,
            Matcher::Pattern(pattern) => glob_match(pattern, prompt),
        }
    }
}

/// What a fired rule does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptResponse {
    /// Finish the completion with this text.
    Text(String),
    /// Return this text but report it was cut off.
    Truncate(String),
    /// Raw per-option log-scores for a scoring request.
    LogScores(Vec<f64>),
    /// Decline to answer. Not an error; never retried.
    Refuse(bool),
    /// Retryable failure with this message.
    TransientError(String),
}

/// One scripted rule. `max_uses: None` means unlimited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub response: ScriptResponse,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_uses: Option<u32>,
}

impl MockRule {
    pub fn new(matcher: Matcher, response: ScriptResponse) -> Self {
        MockRule { matcher, response, max_uses: None }
    }

    pub fn with_max_uses(mut self, max_uses: u32) -> Self {
        self.max_uses = Some(max_uses);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockCallKind {
    Complete,
    ScoreOptions,
}

/// One logged backend invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct MockCall {
    pub kind: MockCallKind,
    pub prompt: String,
    pub options: Option<Vec<String>>,
}

#[derive(Debug)]
struct RuleState {
    rule: MockRule,
    uses: u32,
}

/// Scripted [`Backend`].
#[derive(Debug)]
pub struct MockBackend {
    rules: Mutex<Vec<RuleState>>,
    calls: Mutex<Vec<MockCall>>,
}

impl MockBackend {
    pub fn from_rules(rules: Vec<MockRule>) -> Self {
        MockBackend {
            rules: Mutex::new(rules.into_iter().map(|rule| RuleState { rule, uses: 0 }).collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Loads a JSON rule array from disk.
    pub fn from_script_file(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_script_str(&raw).map_err(|message| ScriptError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_script_str(raw: &str) -> Result<Self, String> {
        let rules: Vec<MockRule> = serde_json::from_str(raw).map_err(|e| e.to_string())?;
        Ok(Self::from_rules(rules))
    }

    /// Snapshot of every call made so far, in order.
    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    fn log(&self, call: MockCall) {
        self.calls.lock().expect("call log poisoned").push(call);
    }

    /// Fires the first live matching rule for which `applies` accepts the
    /// response shape, consuming one use.
    fn fire(
        &self,
        prompt: &str,
        applies: impl Fn(&ScriptResponse) -> bool,
    ) -> Option<ScriptResponse> {
        let mut rules = self.rules.lock().expect("rule table poisoned");
        for state in rules.iter_mut() {
            if let Some(max) = state.rule.max_uses {
                if state.uses >= max {
                    continue;
                }
            }
            if !applies(&state.rule.response) || !state.rule.matcher.matches(prompt) {
                continue;
            }
            state.uses += 1;
            return Some(state.rule.response.clone());
        }
        None
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse script {path}: {message}")]
    Parse { path: std::path::PathBuf, message: String },
}

impl Backend for MockBackend {
    fn complete(&self, request: &GenerationRequest) -> Result<ReplyOutcome, BackendError> {
        self.log(MockCall {
            kind: MockCallKind::Complete,
            prompt: request.prompt.to_string(),
            options: None,
        });
        let response = self
            .fire(request.prompt, |r| !matches!(r, ScriptResponse::LogScores(_)))
            .ok_or_else(|| {
                BackendError::Fatal(format!(
                    "no scripted rule matches completion prompt starting {:?}",
                    request.prompt.chars().take(60).collect::<String>()
                ))
            })?;
        match response {
            ScriptResponse::Text(text) => Ok(ReplyOutcome::Complete(text)),
            ScriptResponse::Truncate(text) => Ok(ReplyOutcome::Truncated(text)),
            ScriptResponse::Refuse(_) => Ok(ReplyOutcome::Refused),
            ScriptResponse::TransientError(msg) => Err(BackendError::Transient(msg)),
            ScriptResponse::LogScores(_) => unreachable!("filtered above"),
        }
    }

    fn score_options(
        &self,
        request: &GenerationRequest,
        options: &[String],
    ) -> Result<Vec<f64>, BackendError> {
        self.log(MockCall {
            kind: MockCallKind::ScoreOptions,
            prompt: request.prompt.to_string(),
            options: Some(options.to_vec()),
        });
        let response = self
            .fire(request.prompt, |r| {
                matches!(r, ScriptResponse::LogScores(_) | ScriptResponse::TransientError(_))
            })
            .ok_or_else(|| {
                BackendError::Capability("no scripted option-scoring rule matches".into())
            })?;
        match response {
            ScriptResponse::LogScores(scores) => {
                if scores.len() != options.len() {
                    return Err(BackendError::Fatal(format!(
                        "script provides {} log-scores for {} options",
                        scores.len(),
                        options.len()
                    )));
                }
                Ok(scores)
            }
            ScriptResponse::TransientError(msg) => Err(BackendError::Transient(msg)),
            _ => unreachable!("filtered above"),
        }
    }
}

/// Glob match where `*` matches any (possibly empty) substring.
fn glob_match(pattern: &str, text: &str) -> bool {
    let segments: Vec<&str> = pattern.split('*').collect();
    if segments.len() == 1 {
        return pattern == text;
    }
    let mut rest = text;
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            continue;
        }
        if i == 0 {
            match rest.strip_prefix(segment) {
                Some(r) => rest = r,
                None => return false,
            }
        } else if i == segments.len() - 1 {
            return rest.ends_with(segment);
        } else {
            match rest.find(segment) {
                Some(at) => rest = &rest[at + segment.len()..],
                None => return false,
            }
        }
    }
    true
}
