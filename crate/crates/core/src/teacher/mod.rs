//! Rationale sources: a completion-endpoint client and the gold-rationale oracle.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Sample, TaskKind};

/// Environment variable holding the endpoint URL.
pub const ENDPOINT_ENV: &str = "TEACHER_ENDPOINT";
/// Default environment variable holding the bearer token.
pub const TOKEN_ENV: &str = "TEACHER_API_KEY";
/// Default cap on rationale length, in characters.
pub const CHAR_BUDGET: usize = 512;

#[derive(Debug, Error)]
pub enum TeacherError {
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: usize, message: String },

    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },

    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("endpoint returned an empty completion")]
    EmptyCompletion,

    #[error("malformed endpoint reply: missing field `{field}`")]
    Protocol { field: String },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("sample `{0}` has no gold rationale")]
    NoGoldRationale(String),

    #[error("audit log: {0}")]
    Audit(#[from] std::io::Error),
}

/// Where requests go and which environment variable carries the token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub url: String,
    pub token_env: Option<String>,
    /// Optional model name passed through to the endpoint.
    pub model: Option<String>,
}

impl Endpoint {
    /// Reads the URL from `TEACHER_ENDPOINT`; the token from `TEACHER_API_KEY` if set.
    pub fn from_env() -> Result<Self, TeacherError> {
        let url = std::env::var(ENDPOINT_ENV)
            .map_err(|_| TeacherError::InvalidRequest(format!("{ENDPOINT_ENV} is not set")))?;
        Ok(Endpoint {
            url,
            token_env: Some(TOKEN_ENV.to_string()),
            model: None,
        })
    }

    fn token(&self) -> Option<String> {
        self.token_env.as_deref().and_then(|v| std::env::var(v).ok())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeacherRequest {
    pub sample_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub endpoint: Endpoint,
}

impl TeacherRequest {
    pub fn new(sample_id: &str, prompt: String, endpoint: Endpoint) -> Self {
        TeacherRequest {
            sample_id: sample_id.to_string(),
            prompt,
            temperature: 0.7,
            max_tokens: 128,
            endpoint,
        }
    }

    pub fn validate(&self) -> Result<(), TeacherError> {
        if self.prompt.trim().is_empty() {
            return Err(TeacherError::InvalidRequest("empty prompt".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(TeacherError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(TeacherError::InvalidRequest("max_tokens must be > 0".into()));
        }
        Ok(())
    }

    /// The JSON body sent on the wire.
    pub fn body(&self) -> serde_json::Value {
        let mut body = serde_json::json!({
            "prompt": self.prompt,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });
        if let Some(m) = &self.endpoint.model {
            body["model"] = serde_json::json!(m);
        }
        body
    }
}

/// A raw HTTP reply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reply {
    pub status: u16,
    pub body: String,
}

/// Moves one JSON request to the endpoint. `Err` means the request never
/// produced an HTTP reply.
pub trait Transport: Sync {
    fn post(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<Reply, String>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpTransport { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl Transport for HttpTransport {
    fn post(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<Reply, String> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req.send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(Reply { status, body })
    }
}

/// Bounded exponential backoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: usize) -> Duration {
        let factor = 1u64 << (attempt.saturating_sub(1)).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Serialize)]
struct AuditEntry<'a> {
    sample_id: &'a str,
    attempt: usize,
    request: &'a serde_json::Value,
    status: Option<u16>,
    response: Option<&'a str>,
    error: Option<&'a str>,
    truncated_from: Option<usize>,
}

/// Append-only line-delimited log of every request and raw response.
pub struct AuditLog {
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: &Path) -> Result<Self, TeacherError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog { file: Mutex::new(file) })
    }

    fn write(&self, entry: &AuditEntry<'_>) -> Result<(), TeacherError> {
        let mut line = serde_json::to_string(entry).expect("audit entry serializes");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())?;
        Ok(())
    }
}

/// A completion-endpoint client with retries, an audit log and a length budget.
pub struct TeacherClient<T> {
    transport: T,
    pub retry: RetryPolicy,
    pub char_budget: usize,
    audit: Option<AuditLog>,
}

impl<T: Transport> TeacherClient<T> {
    pub fn new(transport: T) -> Self {
        TeacherClient {
            transport,
            retry: RetryPolicy::default(),
            char_budget: CHAR_BUDGET,
            audit: None,
        }
    }

    pub fn with_audit(mut self, log: AuditLog) -> Self {
        self.audit = Some(log);
        self
    }

    fn log(&self, entry: AuditEntry<'_>) -> Result<(), TeacherError> {
        match &self.audit {
            Some(a) => a.write(&entry),
            None => Ok(()),
        }
    }

    /// Sends the request and returns the completion text verbatim.
    ///
    /// Transport failures, HTTP 429 and 5xx are retried; 401/403 fail at once.
    pub fn request_rationale(&self, req: &TeacherRequest) -> Result<String, TeacherError> {
        req.validate()?;
        let body = req.body();
        let text = body.to_string();
        let mut headers = Vec::new();
        if let Some(tok) = req.endpoint.token() {
            headers.push(("Authorization".to_string(), format!("Bearer {tok}")));
        }
        let attempts = self.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            let reply = match self.transport.post(&req.endpoint.url, &headers, &text) {
                Ok(r) => r,
                Err(e) => {
                    self.log(AuditEntry {
                        sample_id: &req.sample_id,
                        attempt,
                        request: &body,
                        status: None,
                        response: None,
                        error: Some(&e),
                        truncated_from: None,
                    })?;
                    last_error = e;
                    continue;
                }
            };
            self.log(AuditEntry {
                sample_id: &req.sample_id,
                attempt,
                request: &body,
                status: Some(reply.status),
                response: Some(&reply.body),
                error: None,
                truncated_from: None,
            })?;
            match reply.status {
                200..=299 => return parse_completion(&reply.body),
                401 | 403 => return Err(TeacherError::Auth { status: reply.status }),
                429 | 500..=599 => last_error = format!("HTTP {}", reply.status),
                status => return Err(TeacherError::Http { status, body: reply.body }),
            }
        }
        Err(TeacherError::Network {
            attempts,
            message: last_error,
        })
    }

    /// The completion capped at the character budget; truncations are logged.
    pub fn rationale(&self, req: &TeacherRequest) -> Result<String, TeacherError> {
        let raw = self.request_rationale(req)?;
        let (text, cut) = cap_chars(&raw, self.char_budget);
        if cut {
            log::warn!("rationale for {} truncated from {} characters", req.sample_id, raw.chars().count());
            self.log(AuditEntry {
                sample_id: &req.sample_id,
                attempt: 0,
                request: &serde_json::Value::Null,
                status: None,
                response: None,
                error: None,
                truncated_from: Some(raw.chars().count()),
            })?;
        }
        Ok(text)
    }
}

/// Extracts `completion` from a reply body.
pub fn parse_completion(body: &str) -> Result<String, TeacherError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|_| TeacherError::Protocol {
        field: "completion".into(),
    })?;
    let text = v
        .get("completion")
        .and_then(|c| c.as_str())
        .ok_or_else(|| TeacherError::Protocol {
            field: "completion".into(),
        })?;
    if text.trim().is_empty() {
        return Err(TeacherError::EmptyCompletion);
    }
    Ok(text.to_string())
}

/// The first `budget` characters of `text`, and whether anything was cut.
pub fn cap_chars(text: &str, budget: usize) -> (String, bool) {
    match text.char_indices().nth(budget) {
        Some((i, _)) => (text[..i].to_string(), true),
        None => (text.to_string(), false),
    }
}

/// A few-shot prompt with each exemplar's answer placed before its rationale.
pub fn build_prompt(exemplars: &[Sample], question: &str) -> String {
    let mut out = String::new();
    for e in exemplars {
        out.push_str(&format!("Q: {}\nA: {}\n{}\n\n", e.question, e.answer, e.rationale()));
    }
    out.push_str(&format!("Q: {question}\nA:"));
    out
}

/// The generator's gold rationale for a synthetic sample.
pub fn oracle_rationale(sample: &Sample) -> Result<String, TeacherError> {
    if sample.task_kind == TaskKind::Imported || sample.steps.is_empty() {
        return Err(TeacherError::NoGoldRationale(sample.id.clone()));
    }
    Ok(sample.rationale())
}
