//! Deterministic backend that replays canned completions from a script.
//!
//! The script maps a prompt key (the full prompt text) to a queue of
//! samples. Repeated requests for the same prompt advance a per-key cursor,
//! cycling once the queue is exhausted.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, Completion, CompletionRequest};
use crate::chain::TokenLogprob;

/// One canned response, optionally with token logprobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptSample {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLogprob>>,
}

impl ScriptSample {
    pub fn text_only(text: impl Into<String>) -> Self {
        ScriptSample {
            text: text.into(),
            tokens: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScriptEntry {
    prompt_key: String,
    samples: Vec<ScriptSample>,
}

pub struct ScriptedBackend {
    entries: HashMap<String, Vec<ScriptSample>>,
    cursors: Mutex<HashMap<String, usize>>,
    calls: AtomicU64,
    id: String,
}

impl ScriptedBackend {
    /// Load a script from a JSONL file of `{prompt_key, samples}` records.
    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut entries = HashMap::new();
        for (i, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(&line).map_err(|e| {
                BackendError::InvalidResponse(format!("script line {}: {e}", i + 1))
            })?;
            entries.insert(entry.prompt_key, entry.samples);
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "script".to_string());
        Ok(Self::from_entries(format!("scripted:{name}"), entries))
    }

    pub fn from_entries(
        id: impl Into<String>,
        entries: impl IntoIterator<Item = (String, Vec<ScriptSample>)>,
    ) -> Self {
        ScriptedBackend {
            entries: entries.into_iter().collect(),
            cursors: Mutex::new(HashMap::new()),
            calls: AtomicU64::new(0),
            id: id.into(),
        }
    }

    /// Total number of `complete` calls served; used by call-count audits.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Write entries to a JSONL script file.
    pub fn write_script(
        path: &Path,
        entries: &[(String, Vec<ScriptSample>)],
    ) -> Result<(), BackendError> {
        use std::io::Write;
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (prompt_key, samples) in entries {
            let entry = ScriptEntry {
                prompt_key: prompt_key.clone(),
                samples: samples.clone(),
            };
            let json = serde_json::to_string(&entry)
                .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
            writeln!(file, "{json}")?;
        }
        Ok(())
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let samples =
            self.entries
                .get(&request.prompt)
                .ok_or_else(|| BackendError::ScriptMiss {
                    prompt_prefix: request.prompt.chars().take(64).collect(),
                })?;
        if samples.is_empty() {
            return Err(BackendError::ScriptMiss {
                prompt_prefix: request.prompt.chars().take(64).collect(),
            });
        }
        let cursor = {
            let mut cursors = self.cursors.lock().unwrap();
            let slot = cursors.entry(request.prompt.clone()).or_insert(0);
            let current = *slot;
            *slot += 1;
            current
        };
        let sample = &samples[cursor % samples.len()];
        Ok(Completion {
            text: sample.text.clone(),
            tokens: if request.n_logprobs {
                sample.tokens.clone()
            } else {
                None
            },
            backend_id: self.id.clone(),
            cached: false,
        })
    }
}
