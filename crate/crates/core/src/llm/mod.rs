//! Completion backends: a chat-completions HTTP client, a fixed-response
//! backend, and a record/replay store for offline runs.

mod extract;
mod http;
mod replay;

use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompting::AssembledPrompt;

pub use extract::{extract_dockerfile, ExtractionError};
pub use http::HttpChat;
pub use replay::{ExchangeLog, ReplayBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Base URL of a chat-completions API, or the full `.../chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    /// Must be 0.
    pub temperature: f64,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on every further retry.
    pub retry_backoff_s: f64,
    /// Name of the environment variable that holds the bearer token.
    pub auth_env: Option<String>,
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            timeout_s: 300.0,
            max_retries: 3,
            retry_backoff_s: 1.0,
            auth_env: Some("OPENAI_API_KEY".into()),
            max_in_flight: 4,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature != 0.0 {
            return Err(LlmError::Config(format!(
                "temperature is pinned to 0, got {}",
                self.temperature
            )));
        }
        if !(self.timeout_s > 0.0) {
            return Err(LlmError::Config("timeout_s must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        if !(self.retry_backoff_s >= 0.0) {
            return Err(LlmError::Config(
                "retry_backoff_s must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One prompt/response pair as stored for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionExchange {
    pub prompt_hash: String,
    pub response_text: String,
    pub model: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Backend { status: u16, body: String },
    #[error("no recorded response for prompt {0}")]
    ReplayMiss(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl LlmError {
    /// Network failures, rate limiting and server errors are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Backend { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Hex SHA-256 over the system preamble (if any) and the prompt text.
pub fn prompt_hash(prompt: &AssembledPrompt) -> String {
    let mut h = Sha256::new();
    if let Some(system) = &prompt.system {
        h.update(system.as_bytes());
        h.update([0u8]);
    }
    h.update(prompt.text.as_bytes());
    hex::encode(h.finalize())
}

pub trait Backend: Send + Sync {
    /// Model identifier recorded with exchanges.
    fn model(&self) -> String;
    /// One attempt, without retries.
    fn send(&self, prompt: &AssembledPrompt) -> Result<String, LlmError>;
}

/// Always answers with the same text.
pub struct EchoBackend {
    text: String,
}

impl EchoBackend {
    pub fn new(text: impl Into<String>) -> Self {
        EchoBackend { text: text.into() }
    }
}

impl Backend for EchoBackend {
    fn model(&self) -> String {
        "echo".into()
    }

    fn send(&self, _prompt: &AssembledPrompt) -> Result<String, LlmError> {
        Ok(self.text.clone())
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Shareable client adding retries, a concurrency limit and optional recording
/// on top of a [`Backend`].
pub struct LlmClient {
    backend: Box<dyn Backend>,
    max_retries: u32,
    backoff: Duration,
    slots: Semaphore,
    recorder: Option<ExchangeLog>,
}

impl LlmClient {
    pub fn new(backend: Box<dyn Backend>, config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(LlmClient {
            backend,
            max_retries: config.max_retries,
            backoff: Duration::from_secs_f64(config.retry_backoff_s),
            slots: Semaphore {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
            recorder: None,
        })
    }

    /// Appends every successful exchange to a JSON Lines file.
    pub fn record_to(mut self, path: impl Into<PathBuf>) -> Self {
        self.recorder = Some(ExchangeLog::new(path.into()));
        self
    }

    pub fn complete(&self, prompt: &AssembledPrompt) -> Result<String, LlmError> {
        let _slot = self.slots.acquire();
        let start = Instant::now();
        let mut attempt = 0;
        let text = loop {
            match self.backend.send(prompt) {
                Ok(text) => break text,
                Err(e) if e.is_transient() && attempt < self.max_retries => {
                    let delay = self.backoff * 2u32.pow(attempt);
                    log::warn!(
                        "completion attempt {} failed ({e}); retrying in {delay:?}",
                        attempt + 1
                    );
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        if let Some(log) = &self.recorder {
            log.append(&CompletionExchange {
                prompt_hash: prompt_hash(prompt),
                response_text: text.clone(),
                model: self.backend.model(),
                latency_ms: start.elapsed().as_millis() as u64,
            })?;
        }
        Ok(text)
    }
}
