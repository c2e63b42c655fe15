//! OpenAI-compatible completions client with retries and bounded
//! concurrency.

use std::time::Duration;

use serde::Deserialize;

use super::{Backend, BackendError, Completion, CompletionRequest, RetryConfig, Semaphore};
use crate::chain::TokenLogprob;

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    id: String,
    retry: RetryConfig,
    semaphore: Semaphore,
}

impl HttpBackend {
    /// `base_url` points at the API root (e.g. `http://host:8000/v1`); the
    /// completions path is appended. The bearer token is read from the
    /// environment variable named by `api_key_env`.
    pub fn new(
        base_url: &str,
        model: &str,
        api_key_env: &str,
        retry: RetryConfig,
        max_concurrent: usize,
    ) -> Self {
        let url = format!("{}/completions", base_url.trim_end_matches('/'));
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        HttpBackend {
            agent: config.new_agent(),
            url,
            model: model.to_string(),
            api_key: std::env::var(api_key_env).ok(),
            id: format!("http:{base_url}:{model}"),
            retry,
            semaphore: Semaphore::new(max_concurrent),
        }
    }

    fn body(&self, request: &CompletionRequest) -> String {
        let mut body = serde_json::json!({
            "model": self.model,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "n": 1,
        });
        if request.n_logprobs {
            body["logprobs"] = serde_json::json!(0);
        }
        if let Some(stop) = &request.stop {
            body["stop"] = serde_json::json!(stop);
        }
        body.to_string()
    }

    fn attempt(&self, body: &str) -> Result<Completion, AttemptError> {
        let mut builder = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            builder = builder.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send(body)
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        if (400..500).contains(&status) {
            return Err(AttemptError::Refusal {
                status,
                detail: truncate(&text),
            });
        }
        if status != 200 {
            return Err(AttemptError::Transient(format!(
                "status {status}: {}",
                truncate(&text)
            )));
        }
        parse_completion(&text, &self.id).map_err(AttemptError::Fatal)
    }
}

enum AttemptError {
    Transient(String),
    Refusal { status: u16, detail: String },
    Fatal(BackendError),
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}

#[derive(Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
}

#[derive(Deserialize)]
struct ApiChoice {
    text: String,
    #[serde(default)]
    logprobs: Option<ApiLogprobs>,
}

#[derive(Deserialize)]
struct ApiLogprobs {
    #[serde(default)]
    tokens: Vec<String>,
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
}

fn parse_completion(raw: &str, backend_id: &str) -> Result<Completion, BackendError> {
    let parsed: ApiResponse = serde_json::from_str(raw)
        .map_err(|e| BackendError::InvalidResponse(format!("{e}; body: {}", truncate(raw))))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::InvalidResponse("no choices in response".into()))?;
    let tokens = choice.logprobs.and_then(|lp| {
        if lp.tokens.is_empty() {
            return None;
        }
        Some(
            lp.tokens
                .into_iter()
                .zip(lp.token_logprobs)
                .map(|(text, logprob)| TokenLogprob {
                    text,
                    logprob: logprob.unwrap_or(0.0),
                })
                .collect::<Vec<_>>(),
        )
    });
    Ok(Completion {
        text: choice.text,
        tokens,
        backend_id: backend_id.to_string(),
        cached: false,
    })
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let _permit = self.semaphore.acquire();
        let body = self.body(request);
        let mut last_detail = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            match self.attempt(&body) {
                Ok(mut completion) => {
                    if !request.n_logprobs {
                        completion.tokens = None;
                    }
                    return Ok(completion);
                }
                Err(AttemptError::Refusal { status, detail }) => {
                    return Err(BackendError::Refusal { status, detail })
                }
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Transient(detail)) => {
                    last_detail = detail;
                    if attempt < self.retry.max_attempts {
                        let backoff = self.retry.backoff_ms.saturating_mul(1 << (attempt - 1));
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                }
            }
        }
        Err(BackendError::Transport {
            attempts: self.retry.max_attempts.max(1),
            detail: last_detail,
        })
    }
}
