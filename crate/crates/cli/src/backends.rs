//! Backend construction from the --backend flag.
//!
//! Two forms: `mock:SCRIPT.json` loads a scripted mock for offline and test
//! runs; `http:URL` reaches a generation service speaking a two-route JSON
//! protocol. The flag is optional when --offline replays a recorded cache.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use simploop_core::gateway::{
    Backend, BackendError, DecodeParams, GenerationRequest, MockBackend, ReplyOutcome,
};

use crate::errors::CliError;

/// The single backend id every role binds to. One stable id keeps cache
/// fixtures portable: keys cover the request material, not which backend
/// kind served it.
pub const BACKEND_ID: &str = "default";

/// Environment variable holding the bearer token for live backends.
pub const API_KEY_VAR: &str = "SIMPLOOP_API_KEY";

/// Parsed form of the --backend flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// Scripted mock loaded from a JSON rule file.
    Mock(PathBuf),
    /// Generation service base URL.
    Http(String),
}

impl BackendSpec {
    /// Accepts `mock:PATH`, `http:URL`, and bare `http(s)://URL`. A URL
    /// given without a scheme gets `http://` prepended, so
    /// `http:localhost:8080` works.
    pub fn parse(raw: &str) -> Result<BackendSpec, CliError> {
        if let Some(path) = raw.strip_prefix("mock:") {
            if path.is_empty() {
                return Err(CliError::usage("--backend mock: needs a script path"));
            }
            return Ok(BackendSpec::Mock(PathBuf::from(path)));
        }
        if raw.starts_with("http://") || raw.starts_with("https://") {
            return Ok(BackendSpec::Http(raw.trim_end_matches('/').to_string()));
        }
        if let Some(rest) = raw.strip_prefix("http:") {
            if rest.is_empty() {
                return Err(CliError::usage("--backend http: needs a URL"));
            }
            let url = if rest.starts_with("http://") || rest.starts_with("https://") {
                rest.to_string()
            } else {
                format!("http://{rest}")
            };
            return Ok(BackendSpec::Http(url.trim_end_matches('/').to_string()));
        }
        Err(CliError::usage(format!(
            "unrecognized --backend {raw:?}: expected mock:SCRIPT.json or http:URL"
        )))
    }

    pub fn build(&self) -> Result<Arc<dyn Backend>, CliError> {
        match self {
            BackendSpec::Mock(path) => {
                let mock = MockBackend::from_script_file(path)?;
                Ok(Arc::new(mock))
            }
            BackendSpec::Http(url) => Ok(Arc::new(HttpBackend::new(
                url.clone(),
                std::env::var(API_KEY_VAR).ok(),
            ))),
        }
    }
}

/// Client for a generation service: POST {base}/complete and
/// POST {base}/score_options with a JSON body. HTTP 501 on the scoring
/// route signals the capability gap the readability fallback handles;
/// 408/429/5xx and transport failures are transient and retried by the
/// gateway's policy.
pub struct HttpBackend {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: String, api_key: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        HttpBackend {
            agent: ureq::Agent::new_with_config(config),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
        }
    }

    fn post<T: serde::de::DeserializeOwned>(
        &self,
        route: &str,
        body: &WireRequest,
    ) -> Result<T, BackendError> {
        let url = format!("{}/{route}", self.base_url);
        let mut request = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|err| classify(route, err))?;
        response
            .body_mut()
            .read_json::<T>()
            .map_err(|err| BackendError::Fatal(format!("{route}: malformed response body: {err}")))
    }
}

fn classify(route: &str, err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::StatusCode(code) => match code {
            501 => BackendError::Capability(format!("{route}: backend answered 501")),
            408 | 429 | 500 | 502 | 503 | 504 => {
                BackendError::Transient(format!("{route}: backend answered {code}"))
            }
            _ => BackendError::Fatal(format!("{route}: backend answered {code}")),
        },
        // connection, DNS, TLS, and timeout failures are all worth a retry
        other => BackendError::Transient(format!("{route}: {other}")),
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    backend_id: &'a str,
    decode: &'a DecodeParams,
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    options: Option<&'a [String]>,
}

#[derive(Deserialize)]
struct WireCompletion {
    text: String,
    finish_reason: String,
}

#[derive(Deserialize)]
struct WireScores {
    log_scores: Vec<f64>,
}

impl Backend for HttpBackend {
    fn complete(&self, request: &GenerationRequest) -> Result<ReplyOutcome, BackendError> {
        let wire = WireRequest {
            backend_id: request.backend_id,
            decode: request.decode,
            prompt: request.prompt,
            options: None,
        };
        let reply: WireCompletion = self.post("complete", &wire)?;
        match reply.finish_reason.as_str() {
            "complete" => Ok(ReplyOutcome::Complete(reply.text)),
            "truncated" => Ok(ReplyOutcome::Truncated(reply.text)),
            "refused" => Ok(ReplyOutcome::Refused),
            other => Err(BackendError::Fatal(format!(
                "complete: unknown finish_reason {other:?}"
            ))),
        }
    }

    fn score_options(
        &self,
        request: &GenerationRequest,
        options: &[String],
    ) -> Result<Vec<f64>, BackendError> {
        let wire = WireRequest {
            backend_id: request.backend_id,
            decode: request.decode,
            prompt: request.prompt,
            options: Some(options),
        };
        let reply: WireScores = self.post("score_options", &wire)?;
        Ok(reply.log_scores)
    }
}
