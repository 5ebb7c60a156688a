//! Transport layer for the live decision provider: authenticated
//! chat-completion calls with timeout, retry with exponential backoff and a
//! client-side rate limit, plus transcript recording and replay.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::semantic::{DecisionProvider, PromptDoc, ProviderError, ProviderResponse};

/// Live-endpoint configuration. The API key is resolved from the
/// environment variable named in `api_key_env`; an empty name sends no
/// authorization header (local stubs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    #[serde(default)]
    pub rate_limit_per_min: Option<f64>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_backoff")]
    pub backoff_base_s: f64,
}

fn default_temperature() -> f64 {
    0.0
}

fn default_backoff() -> f64 {
    0.5
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".to_string(),
            model_name: "gpt-4".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            timeout_s: 60.0,
            max_retries: 3,
            rate_limit_per_min: None,
            temperature: 0.0,
            backoff_base_s: 0.5,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(ProviderError::Transport("timeout_s must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded exchange. `prompt_hash` is the SHA-256 of the prompt's
/// canonical text, which replay uses to detect drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub prompt_hash: String,
    pub prompt_text: String,
    pub response_text: String,
    pub latency_s: f64,
    pub timestamp: f64,
}

pub fn prompt_hash(prompt: &PromptDoc) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.canonical_text().as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript line {0} is not a valid record: {1}")]
    Parse(usize, serde_json::Error),
}

/// Reads a line-delimited JSON transcript file.
pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, TranscriptError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| TranscriptError::Parse(i + 1, e))?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Stateless-per-query chat provider over an OpenAI-compatible
/// chat-completions endpoint. Shareable across missions; the rate limiter
/// is the only synchronized state.
pub struct LiveProvider {
    config: ClientConfig,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
}

impl LiveProvider {
    pub fn new(config: ClientConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build();
        Ok(Self { config, agent, last_request: Mutex::new(None) })
    }

    fn api_key(&self) -> Result<Option<String>, ProviderError> {
        if self.config.api_key_env.is_empty() {
            return Ok(None);
        }
        match std::env::var(&self.config.api_key_env) {
            Ok(key) => Ok(Some(key)),
            Err(_) => Err(ProviderError::Auth(format!(
                "environment variable {} is not set",
                self.config.api_key_env
            ))),
        }
    }

    fn respect_rate_limit(&self) {
        let Some(per_min) = self.config.rate_limit_per_min else { return };
        if per_min.is_nan() || per_min <= 0.0 {
            return;
        }
        let min_interval = Duration::from_secs_f64(60.0 / per_min);
        let mut last = self.last_request.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < min_interval {
                std::thread::sleep(min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn single_request(&self, prompt: &PromptDoc) -> Result<String, ProviderError> {
        let key = self.api_key()?;
        self.respect_rate_limit();
        let body = ChatRequest {
            model: &self.config.model_name,
            messages: vec![
                ChatMessage { role: "system", content: &prompt.system_text },
                ChatMessage { role: "user", content: &prompt.payload },
            ],
            temperature: self.config.temperature,
        };
        let mut request = self.agent.post(&self.config.endpoint_url);
        if let Some(key) = &key {
            request = request.set("Authorization", &format!("Bearer {key}"));
        }
        match request.send_json(serde_json::to_value(&body).expect("request serializes")) {
            Ok(response) => {
                let parsed: ChatResponse = response
                    .into_json()
                    .map_err(|e| ProviderError::Transport(format!("bad response body: {e}")))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| ProviderError::Transport("response has no choices".into()))
            }
            Err(ureq::Error::Status(401, _)) | Err(ureq::Error::Status(403, _)) => {
                Err(ProviderError::Auth("endpoint rejected credentials".into()))
            }
            Err(ureq::Error::Status(429, _)) => Err(ProviderError::RateLimited),
            Err(ureq::Error::Status(code, _)) => Err(ProviderError::Http(code)),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") {
                    Err(ProviderError::Timeout)
                } else {
                    Err(ProviderError::Transport(msg))
                }
            }
        }
    }

    fn retryable(err: &ProviderError) -> bool {
        matches!(
            err,
            ProviderError::Timeout
                | ProviderError::RateLimited
                | ProviderError::Transport(_)
                | ProviderError::Http(500..=599)
        )
    }
}

impl DecisionProvider for LiveProvider {
    fn kind(&self) -> &str {
        "live"
    }

    /// Sends a single stateless chat request (system + user message);
    /// retries with exponential backoff up to `max_retries` extra attempts.
    fn complete(&self, prompt: &PromptDoc) -> Result<ProviderResponse, ProviderError> {
        let started = Instant::now();
        let mut attempt = 0u32;
        loop {
            match self.single_request(prompt) {
                Ok(text) => {
                    return Ok(ProviderResponse {
                        text,
                        latency_s: started.elapsed().as_secs_f64(),
                    })
                }
                Err(err) => {
                    if attempt >= self.config.max_retries || !Self::retryable(&err) {
                        return Err(err);
                    }
                    let backoff = self.config.backoff_base_s * 2f64.powi(attempt as i32);
                    std::thread::sleep(Duration::from_secs_f64(backoff));
                    attempt += 1;
                }
            }
        }
    }
}

/// Wraps any provider and appends a line-delimited JSON transcript record
/// for every completed query.
pub struct RecordingProvider<P: DecisionProvider> {
    inner: P,
    sink: Mutex<File>,
}

impl<P: DecisionProvider> RecordingProvider<P> {
    pub fn create(inner: P, path: &Path) -> Result<Self, TranscriptError> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(Self { inner, sink: Mutex::new(file) })
    }
}

impl<P: DecisionProvider> DecisionProvider for RecordingProvider<P> {
    fn kind(&self) -> &str {
        self.inner.kind()
    }

    fn complete(&self, prompt: &PromptDoc) -> Result<ProviderResponse, ProviderError> {
        let response = self.inner.complete(prompt)?;
        let record = TranscriptRecord {
            prompt_hash: prompt_hash(prompt),
            prompt_text: prompt.canonical_text(),
            response_text: response.text.clone(),
            latency_s: response.latency_s,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        let mut sink = self.sink.lock().unwrap();
        writeln!(sink, "{line}")
            .map_err(|e| ProviderError::Transport(format!("transcript write failed: {e}")))?;
        Ok(response)
    }
}

/// Replays a recorded transcript in order. Each query must hash to the
/// next record's prompt hash; any mismatch or exhaustion is a hard error
/// so silent drift cannot happen.
pub struct ReplayProvider {
    records: Mutex<VecDeque<TranscriptRecord>>,
}

impl ReplayProvider {
    pub fn from_file(path: &Path) -> Result<Self, TranscriptError> {
        Ok(Self::from_records(load_transcript(path)?))
    }

    pub fn from_records(records: Vec<TranscriptRecord>) -> Self {
        Self { records: Mutex::new(records.into()) }
    }
}

impl DecisionProvider for ReplayProvider {
    fn kind(&self) -> &str {
        "replay"
    }

    fn complete(&self, prompt: &PromptDoc) -> Result<ProviderResponse, ProviderError> {
        let mut records = self.records.lock().unwrap();
        let record = records.pop_front().ok_or(ProviderError::ExhaustedTranscript)?;
        if record.prompt_hash != prompt_hash(prompt) {
            return Err(ProviderError::HashMismatch);
        }
        Ok(ProviderResponse { text: record.response_text, latency_s: record.latency_s })
    }
}
