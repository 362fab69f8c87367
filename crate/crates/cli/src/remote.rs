//! HTTP/JSON client for external inference servers, speaking a minimal
//! three-endpoint protocol: `/v1/score` (per-label logprobs for a prompt),
//! `/v1/generate` (deterministic text generation), and `/v1/logprob`
//! (per-token logprobs of a continuation). Scoring is pure, so retries are
//! safe; transport failures and 5xx responses back off exponentially
//! (base 250 ms, factor 2), protocol errors fail fast.
//!
//! Masked positions travel as the literal `<mask>` inside prompt text,
//! since remote tokenizers are opaque to this client; that makes remote
//! masking a text-level approximation of the token-level contract.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use ccshap_core::corpus::Label;
use ccshap_core::math::{clamp_probability, exp};
use ccshap_core::scoring::{CoalitionScorer, Explanation, ExplanationSource, ScoreError, ScoreRequest, ScoreTarget};
use ccshap_core::token::{tokenize, CoalitionMask, TokenSequence};

pub const DEFAULT_BACKOFF_BASE_MS: u64 = 250;

/// Connection settings for one inference server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEndpoint {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    #[serde(skip)]
    pub auth_token: Option<String>,
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_max_retries() -> u32 {
    3
}

fn default_max_in_flight() -> usize {
    4
}

fn default_backoff_base_ms() -> u64 {
    DEFAULT_BACKOFF_BASE_MS
}

impl RemoteEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            max_in_flight: default_max_in_flight(),
            backoff_base_ms: default_backoff_base_ms(),
            auth_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), RemoteError> {
        if self.timeout_secs == 0 {
            return Err(RemoteError::Config("timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(RemoteError::Config("max_in_flight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RemoteError {
    #[error("transport failure after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("server returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("protocol error: {detail}")]
    Protocol { detail: String },
    #[error("endpoint config: {0}")]
    Config(String),
}

impl From<RemoteError> for ScoreError {
    fn from(e: RemoteError) -> Self {
        match e {
            RemoteError::Transport { .. } => ScoreError::Transport(e.to_string()),
            other => ScoreError::Backend(other.to_string()),
        }
    }
}

/// Counting semaphore capping concurrent requests.
struct Semaphore {
    available: Mutex<usize>,
    signal: Condvar,
}

impl Semaphore {
    fn new(capacity: usize) -> Self {
        Self { available: Mutex::new(capacity), signal: Condvar::new() }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.signal.wait(available).unwrap();
        }
        *available -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.semaphore.available.lock().unwrap() += 1;
        self.semaphore.signal.notify_one();
    }
}

#[derive(Serialize)]
struct ScoreRequestBody<'a> {
    model: &'a str,
    prompt: &'a str,
    labels: Vec<&'a str>,
}

#[derive(Deserialize)]
struct ScoreResponseBody {
    label_logprobs: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct GenerateRequestBody<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
}

#[derive(Deserialize)]
struct GenerateResponseBody {
    text: String,
}

#[derive(Serialize)]
struct LogprobRequestBody<'a> {
    prompt: &'a str,
    continuation: &'a str,
}

#[derive(Deserialize)]
struct LogprobResponseBody {
    token_logprobs: Vec<f64>,
}

pub struct RemoteClient {
    endpoint: RemoteEndpoint,
    agent: ureq::Agent,
    semaphore: Semaphore,
}

impl RemoteClient {
    pub fn new(endpoint: RemoteEndpoint) -> Result<Self, RemoteError> {
        endpoint.validate()?;
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .http_status_as_error(false)
            .build();
        let semaphore = Semaphore::new(endpoint.max_in_flight);
        Ok(Self { endpoint, agent: ureq::Agent::new_with_config(config), semaphore })
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }

    fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, RemoteError> {
        let url = format!("{}{}", self.endpoint.base_url.trim_end_matches('/'), path);
        let attempts = self.endpoint.max_retries + 1;
        let mut last_transport = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.endpoint.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let _permit = self.semaphore.acquire();
            let mut request = self.agent.post(&url);
            if let Some(token) = &self.endpoint.auth_token {
                request = request.header("Authorization", &format!("Bearer {token}"));
            }
            match request.send_json(body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if status >= 500 {
                        let body = response.body_mut().read_to_string().unwrap_or_default();
                        last_transport = format!("HTTP {status}: {}", excerpt(&body));
                        continue;
                    }
                    if status >= 400 {
                        let body = response.body_mut().read_to_string().unwrap_or_default();
                        return Err(RemoteError::Http { status, body: excerpt(&body) });
                    }
                    let text = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| RemoteError::Protocol { detail: format!("unreadable body: {e}") })?;
                    return serde_json::from_str(&text).map_err(|e| RemoteError::Protocol {
                        detail: format!("malformed JSON ({e}) in body: {}", excerpt(&text)),
                    });
                }
                Err(e) => {
                    last_transport = e.to_string();
                }
            }
        }
        Err(RemoteError::Transport { attempts, detail: last_transport })
    }

    /// Per-label probabilities for a (masked) prompt: exponentiated
    /// logprobs renormalized over the requested label set.
    pub fn remote_classify(
        &self,
        masked_text: &str,
        labels: &[&str],
    ) -> Result<BTreeMap<String, f64>, RemoteError> {
        if labels.is_empty() {
            return Err(RemoteError::Config("labels must be nonempty".into()));
        }
        let body = ScoreRequestBody { model: &self.endpoint.model_name, prompt: masked_text, labels: labels.to_vec() };
        let response: ScoreResponseBody = self.post_json("/v1/score", &body)?;

        let mut logprobs = Vec::with_capacity(labels.len());
        for &label in labels {
            let lp = response.label_logprobs.get(label).ok_or_else(|| RemoteError::Protocol {
                detail: format!("response missing label {label:?}"),
            })?;
            if !lp.is_finite() {
                return Err(RemoteError::Protocol { detail: format!("non-finite logprob for {label:?}") });
            }
            logprobs.push(*lp);
        }
        let max = logprobs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnormalized: Vec<f64> = logprobs.iter().map(|lp| exp(lp - max)).collect();
        let total: f64 = unnormalized.iter().sum();
        Ok(labels
            .iter()
            .zip(unnormalized)
            .map(|(label, value)| (label.to_string(), value / total))
            .collect())
    }

    /// Deterministic (temperature 0) free-text generation.
    pub fn remote_explain(&self, prompt: &str) -> Result<String, RemoteError> {
        let body = GenerateRequestBody { model: &self.endpoint.model_name, prompt, temperature: 0.0 };
        let response: GenerateResponseBody = self.post_json("/v1/generate", &body)?;
        Ok(response.text)
    }

    /// Length-normalized continuation probability: exp of the mean token
    /// logprob.
    pub fn remote_sequence_logprob(&self, masked_text: &str, continuation: &str) -> Result<f64, RemoteError> {
        if continuation.is_empty() {
            return Err(RemoteError::Config("continuation must be nonempty".into()));
        }
        let body = LogprobRequestBody { prompt: masked_text, continuation };
        let response: LogprobResponseBody = self.post_json("/v1/logprob", &body)?;
        if response.token_logprobs.is_empty() {
            return Err(RemoteError::Protocol { detail: "empty token_logprobs".into() });
        }
        if response.token_logprobs.iter().any(|lp| !lp.is_finite()) {
            return Err(RemoteError::Protocol { detail: "non-finite token logprob".into() });
        }
        let mean = response.token_logprobs.iter().sum::<f64>() / response.token_logprobs.len() as f64;
        Ok(exp(mean))
    }
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 200;
    if body.len() <= LIMIT {
        body.to_string()
    } else {
        let mut end = LIMIT;
        while !body.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &body[..end])
    }
}

/// Audit backend over a remote endpoint. The attribution grid is the
/// built-in tokenizer's; coalitions are rendered as prompt text with
/// `<mask>` at hidden positions.
pub struct RemoteBackend {
    client: RemoteClient,
    id: String,
    explanation_prompt: String,
}

impl RemoteBackend {
    pub fn new(endpoint: RemoteEndpoint, explanation_prompt: String) -> Result<Self, RemoteError> {
        let id = format!("remote:{}:{}", endpoint.base_url, endpoint.model_name);
        Ok(Self { client: RemoteClient::new(endpoint)?, id, explanation_prompt })
    }

    pub fn client(&self) -> &RemoteClient {
        &self.client
    }
}

impl CoalitionScorer for RemoteBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let masked = request.sequence.masked_text(request.mask);
        let value = match request.target {
            ScoreTarget::Classification(label) => {
                let labels = [Label::Phishing.as_str(), Label::Legitimate.as_str()];
                let probabilities = self.client.remote_classify(&masked, &labels)?;
                *probabilities.get(label.as_str()).expect("requested label present")
            }
            ScoreTarget::Explanation(explanation) => {
                self.client.remote_sequence_logprob(&masked, &explanation.text)?
            }
        };
        Ok(clamp_probability(value))
    }
}

impl ExplanationSource for RemoteBackend {
    fn explain(&self, sequence: &TokenSequence, predicted: Label) -> Result<Explanation, ScoreError> {
        let full_text = sequence.masked_text(&CoalitionMask::all_visible(sequence.len()));
        let instruction = self.explanation_prompt.replace("{label}", predicted.as_str());
        let prompt = format!("{full_text}\n\n{instruction}");
        let text = self.client.remote_explain(&prompt)?;
        let tokens = match tokenize(&text) {
            Ok(seq) => seq.surface,
            Err(_) => Vec::new(),
        };
        Ok(Explanation { text, tokens })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_validation() {
        let mut endpoint = RemoteEndpoint::new("http://localhost:1", "m");
        endpoint.timeout_secs = 0;
        assert!(endpoint.validate().is_err());
        endpoint.timeout_secs = 5;
        endpoint.max_in_flight = 0;
        assert!(endpoint.validate().is_err());
    }

    #[test]
    fn excerpt_truncates_on_char_boundary() {
        let long = "é".repeat(300);
        let cut = excerpt(&long);
        assert!(cut.ends_with("..."));
        assert!(cut.len() <= 204);
    }

    #[test]
    fn semaphore_caps_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;

        let semaphore = Arc::new(Semaphore::new(2));
        let current = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let semaphore = semaphore.clone();
            let current = current.clone();
            let peak = peak.clone();
            handles.push(std::thread::spawn(move || {
                let _permit = semaphore.acquire();
                let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(10));
                current.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
