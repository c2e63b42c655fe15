//! Pluggable text-generation backends: an OpenAI-compatible HTTP client, a
//! scripted backend for replayable experiments, and a content-addressed
//! response cache.

mod cache;
mod http;
mod scripted;

pub use cache::{CacheStats, ResponseCache};
pub use http::HttpBackend;
pub use scripted::{ScriptSample, ScriptedBackend};

use std::path::PathBuf;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chain::TokenLogprob;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("backend refused the request (status {status}): {detail}")]
    Refusal { status: u16, detail: String },
    #[error("scripted backend has no entry for prompt starting {prompt_prefix:?}")]
    ScriptMiss { prompt_prefix: String },
    #[error("unexpected backend response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend io: {0}")]
    Io(#[from] std::io::Error),
}

/// A single completion request. `seed_tag` only disambiguates repeated
/// samples of the same prompt in the cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub n_logprobs: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
    pub seed_tag: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, seed_tag: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.7,
            max_tokens: 512,
            n_logprobs: false,
            stop: None,
            seed_tag: seed_tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest(
                "prompt must be non-empty".into(),
            ));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A backend response. `tokens` is present iff logprobs were requested and
/// the backend supplies them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLogprob>>,
    pub backend_id: String,
    #[serde(default)]
    pub cached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig {
            max_attempts: 3,
            backoff_ms: 1000,
        }
    }
}

fn default_max_concurrent() -> usize {
    4
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

/// Which transport a backend uses, with its kind-specific settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    HttpOpenaiCompatible {
        base_url: String,
        model: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
    },
    Scripted {
        script_path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent_requests: usize,
    #[serde(default)]
    pub retry: RetryConfig,
}

/// A completion source. Implementations are safe for concurrent calls.
pub trait Backend: Send + Sync {
    /// Stable identifier used in cache keys and provenance records.
    fn id(&self) -> &str;

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError>;
}

/// Build the backend named by `config`.
pub fn make_backend(config: &BackendConfig) -> Result<Box<dyn Backend>, BackendError> {
    Ok(match &config.kind {
        BackendKind::HttpOpenaiCompatible {
            base_url,
            model,
            api_key_env,
        } => Box::new(HttpBackend::new(
            base_url,
            model,
            api_key_env,
            config.retry,
            config.max_concurrent_requests,
        )),
        BackendKind::Scripted { script_path } => Box::new(ScriptedBackend::from_path(script_path)?),
    })
}

/// Content address of a request against a backend: `sha256:` plus 64 hex
/// digits over the canonical serialization (sorted keys, shortest-form
/// numbers) of the identifying fields. Never depends on wall clock or host.
pub fn cache_key(request: &CompletionRequest, backend_id: &str) -> String {
    let canonical = serde_json::json!({
        "backend_id": backend_id,
        "max_tokens": request.max_tokens,
        "n_logprobs": request.n_logprobs,
        "prompt": request.prompt,
        "seed_tag": request.seed_tag,
        "stop": request.stop,
        "temperature": request.temperature,
    });
    let mut hasher = Sha256::new();
    hasher.update(canonical.to_string().as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(71);
    out.push_str("sha256:");
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Counting semaphore bounding concurrent backend calls.
pub(crate) struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub(crate) struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().unwrap();
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}
