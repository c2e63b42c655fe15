//! Constraint verifiers over reasoning steps: relevance, logical
//! consistency and mathematical accuracy (all LLM-sampled, mapped to binary
//! verdicts), plus step perplexity, and the sampled-expectation score.

mod prompts;

pub use prompts::PromptCatalog;

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, CompletionRequest, ResponseCache};
use crate::chain::ReasoningStep;
use crate::mathcheck::{check_formula, extract_marked_formulas, parse_formula_json, ToleranceSpec};

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("perplexity needs a non-empty token logprob list")]
    EmptyTokenList,
    #[error("perplexity must be >= 1, got {0}")]
    InvalidPerplexity(f64),
    #[error("expectation needs at least one verdict")]
    EmptyVerdicts,
    #[error("step {step_index} has no token logprobs; the backend must supply them")]
    MissingLogprobs { step_index: usize },
    #[error("n_samples must be >= 1")]
    NoSamples,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("score io: {0}")]
    Io(#[from] std::io::Error),
    #[error("score line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// The reasoning constraint a verdict or score refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierKind {
    Relevance,
    Consistency,
    MathAccuracy,
    Perplexity,
}

impl VerifierKind {
    pub const ALL: [VerifierKind; 4] = [
        VerifierKind::Perplexity,
        VerifierKind::Relevance,
        VerifierKind::MathAccuracy,
        VerifierKind::Consistency,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VerifierKind::Relevance => "relevance",
            VerifierKind::Consistency => "consistency",
            VerifierKind::MathAccuracy => "math_accuracy",
            VerifierKind::Perplexity => "perplexity",
        }
    }
}

impl fmt::Display for VerifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VerifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relevance" | "rel" | "r" => Ok(VerifierKind::Relevance),
            "consistency" | "cons" | "c" => Ok(VerifierKind::Consistency),
            "math_accuracy" | "math" | "m" => Ok(VerifierKind::MathAccuracy),
            "perplexity" | "ppl" | "p" => Ok(VerifierKind::Perplexity),
            other => Err(format!("unknown verifier {other:?}")),
        }
    }
}

/// One binary verifier sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerifierKind,
    pub value: u8,
    pub raw_output: String,
    pub parse_ok: bool,
}

impl Verdict {
    fn new(kind: VerifierKind, value: u8, raw_output: impl Into<String>, parse_ok: bool) -> Self {
        debug_assert!(value <= 1);
        Verdict {
            kind,
            value,
            raw_output: raw_output.into(),
            parse_ok,
        }
    }
}

/// Sampled-expectation score of one verifier on one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub step_index: usize,
    pub kind: VerifierKind,
    pub score: f64,
    pub n_samples: usize,
    pub verdicts: Vec<Verdict>,
}

/// Map a verifier generation to a binary verdict. Total: unrecognized text
/// becomes a conservative 0 with `parse_ok = false`. Negation patterns are
/// checked before their positive counterparts.
pub fn parse_verdict(kind: VerifierKind, raw_output: &str) -> Verdict {
    let lower = raw_output.to_lowercase();
    let text = lower.trim();
    let (value, parse_ok) = match kind {
        VerifierKind::Relevance => {
            if text.contains("not relevant")
                || text.contains("irrelevant")
                || text.contains("is not")
                || text == "no"
                || text.starts_with("no,")
                || text.starts_with("no.")
                || text.starts_with("no ")
            {
                (0, true)
            } else if text.starts_with("yes")
                || text.contains("the solution is relevant")
                || text.contains("is relevant")
            {
                (1, true)
            } else {
                (0, false)
            }
        }
        VerifierKind::Consistency => {
            if text.contains("not contradict")
                || text.contains("does not contradict")
                || text.contains("no contradiction")
            {
                (1, true)
            } else if text.contains("not consistent")
                || text.contains("inconsistent")
                || text.contains("contradict")
            {
                (0, true)
            } else if text.contains("consistent") {
                (1, true)
            } else {
                (0, false)
            }
        }
        // Math and perplexity verdicts are built elsewhere.
        _ => (0, false),
    };
    Verdict::new(kind, value, raw_output, parse_ok)
}

/// Perplexity of a step from its token logprobs: exp(-mean logprob).
pub fn step_perplexity(token_logprobs: &[f64]) -> Result<f64, VerifierError> {
    if token_logprobs.is_empty() {
        return Err(VerifierError::EmptyTokenList);
    }
    let mean = token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    Ok((-mean).exp())
}

/// Map a perplexity to a (0, 1] score: the reciprocal, which equals the
/// geometric-mean token probability. Strictly decreasing in perplexity.
pub fn perplexity_score(ppl: f64) -> Result<f64, VerifierError> {
    if ppl.is_nan() || ppl < 1.0 - 1e-9 {
        return Err(VerifierError::InvalidPerplexity(ppl));
    }
    Ok((1.0 / ppl).min(1.0))
}

/// Arithmetic mean of verdict values: the sampled estimate of the expected
/// indicator.
pub fn expectation_score(verdicts: &[Verdict]) -> Result<f64, VerifierError> {
    if verdicts.is_empty() {
        return Err(VerifierError::EmptyVerdicts);
    }
    debug_assert!(verdicts.windows(2).all(|w| w[0].kind == w[1].kind));
    let sum: u32 = verdicts.iter().map(|v| v.value as u32).sum();
    Ok(sum as f64 / verdicts.len() as f64)
}

/// Decoding parameters for verifier sampling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.7,
            max_tokens: 128,
        }
    }
}

/// Runs the LLM verifiers against a backend, optionally through the
/// response cache.
pub struct Verifier<'a> {
    backend: &'a dyn Backend,
    cache: Option<&'a ResponseCache>,
    catalog: &'a PromptCatalog,
    sampling: SamplingParams,
    tolerance: ToleranceSpec,
}

impl<'a> Verifier<'a> {
    pub fn new(backend: &'a dyn Backend, catalog: &'a PromptCatalog) -> Self {
        Verifier {
            backend,
            cache: None,
            catalog,
            sampling: SamplingParams::default(),
            tolerance: ToleranceSpec::default(),
        }
    }

    pub fn with_cache(mut self, cache: &'a ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_sampling(mut self, sampling: SamplingParams) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_tolerance(mut self, tolerance: ToleranceSpec) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn catalog(&self) -> &PromptCatalog {
        self.catalog
    }

    fn sample(
        &self,
        prompt: &str,
        seed_tag: String,
        stop: Option<Vec<String>>,
    ) -> Result<String, VerifierError> {
        let request = CompletionRequest {
            prompt: prompt.to_string(),
            temperature: self.sampling.temperature,
            max_tokens: self.sampling.max_tokens,
            n_logprobs: false,
            stop,
            seed_tag,
        };
        let completion = match self.cache {
            Some(cache) => cache.cached_complete(self.backend, &request)?,
            None => self.backend.complete(&request)?,
        };
        Ok(completion.text)
    }

    fn sampled_score(
        &self,
        kind: VerifierKind,
        prompt: &str,
        step_index: usize,
        n_samples: usize,
    ) -> Result<StepScore, VerifierError> {
        if n_samples == 0 {
            return Err(VerifierError::NoSamples);
        }
        let mut verdicts = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let raw = self.sample(prompt, format!("{kind}:{i}"), None)?;
            verdicts.push(parse_verdict(kind, &raw));
        }
        let score = expectation_score(&verdicts)?;
        Ok(StepScore {
            step_index,
            kind,
            score,
            n_samples,
            verdicts,
        })
    }

    /// Does the candidate step add information that helps solve the
    /// problem?
    pub fn verify_relevance(
        &self,
        question: &str,
        previous_steps: &[ReasoningStep],
        step: &ReasoningStep,
        n_samples: usize,
    ) -> Result<StepScore, VerifierError> {
        let previous = join_steps(previous_steps);
        let prompt = self
            .catalog
            .relevance_prompt(question, &previous, &step.text);
        self.sampled_score(VerifierKind::Relevance, &prompt, step.index, n_samples)
    }

    /// Does the candidate step contradict anything established before it?
    pub fn verify_consistency(
        &self,
        previous_steps: &[ReasoningStep],
        step: &ReasoningStep,
        n_samples: usize,
    ) -> Result<StepScore, VerifierError> {
        let previous = join_steps(previous_steps);
        let prompt = self.catalog.consistency_prompt(&previous, &step.text);
        self.sampled_score(VerifierKind::Consistency, &prompt, step.index, n_samples)
    }

    /// Are the calculations in the step correct? Marker formulas are
    /// checked deterministically with no backend call; otherwise formulas
    /// are extracted by the LLM and each sample's verdict is 1 iff every
    /// extracted formula checks. A step with no formulas passes vacuously.
    pub fn verify_math(
        &self,
        step: &ReasoningStep,
        n_samples: usize,
    ) -> Result<StepScore, VerifierError> {
        if n_samples == 0 {
            return Err(VerifierError::NoSamples);
        }
        let kind = VerifierKind::MathAccuracy;
        let scan = extract_marked_formulas(&step.text);
        if !scan.formulas.is_empty() {
            let holds = scan
                .formulas
                .iter()
                .all(|f| check_formula(f, &self.tolerance).holds);
            let verdict = Verdict::new(kind, holds as u8, "", true);
            return Ok(StepScore {
                step_index: step.index,
                kind,
                score: verdict.value as f64,
                n_samples: 1,
                verdicts: vec![verdict],
            });
        }

        let prompt = self.catalog.math_prompt(&step.text);
        let stop = Some(vec!["```".to_string()]);
        let mut verdicts = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let raw = self.sample(&prompt, format!("{kind}:{i}"), stop.clone())?;
            let verdict = match self.judge_extraction(&raw) {
                Some(value) => Verdict::new(kind, value, raw, true),
                None => {
                    // One retry on unparseable extraction output, then a
                    // vacuous pass: a failed extraction is not evidence of
                    // a wrong calculation.
                    let retry = self.sample(&prompt, format!("{kind}:{i}:retry"), stop.clone())?;
                    match self.judge_extraction(&retry) {
                        Some(value) => Verdict::new(kind, value, retry, true),
                        None => Verdict::new(kind, 1, retry, false),
                    }
                }
            };
            verdicts.push(verdict);
        }
        let score = expectation_score(&verdicts)?;
        Ok(StepScore {
            step_index: step.index,
            kind,
            score,
            n_samples,
            verdicts,
        })
    }

    fn judge_extraction(&self, raw: &str) -> Option<u8> {
        let stripped = raw.trim().trim_matches('`');
        let stripped = stripped.strip_prefix("json").unwrap_or(stripped).trim();
        if stripped.is_empty() {
            return Some(1);
        }
        match parse_formula_json(raw) {
            Ok(formulas) => Some(
                formulas
                    .iter()
                    .all(|f| check_formula(f, &self.tolerance).holds) as u8,
            ),
            Err(_) => None,
        }
    }

    /// Perplexity score of a step from its attached token logprobs. No
    /// backend calls; fails fast when logprobs are absent.
    pub fn perplexity(&self, step: &ReasoningStep) -> Result<StepScore, VerifierError> {
        let logprobs = step
            .token_logprobs
            .as_deref()
            .filter(|l| !l.is_empty())
            .ok_or(VerifierError::MissingLogprobs {
                step_index: step.index,
            })?;
        let ppl = step_perplexity(logprobs)?;
        Ok(StepScore {
            step_index: step.index,
            kind: VerifierKind::Perplexity,
            score: perplexity_score(ppl)?,
            n_samples: 1,
            verdicts: Vec::new(),
        })
    }
}

fn join_steps(steps: &[ReasoningStep]) -> String {
    steps
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Persisted form of a step score: one JSONL object per (chain, step,
/// verifier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub chain_id: String,
    pub step_index: usize,
    pub kind: VerifierKind,
    pub score: f64,
    pub n_samples: usize,
    pub verdicts: Vec<VerdictRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub value: u8,
    pub parse_ok: bool,
}

impl ScoreRecord {
    pub fn from_step_score(chain_id: &str, score: &StepScore) -> Self {
        ScoreRecord {
            chain_id: chain_id.to_string(),
            step_index: score.step_index,
            kind: score.kind,
            score: score.score,
            n_samples: score.n_samples,
            verdicts: score
                .verdicts
                .iter()
                .map(|v| VerdictRecord {
                    value: v.value,
                    parse_ok: v.parse_ok,
                })
                .collect(),
        }
    }

    pub fn to_step_score(&self) -> StepScore {
        StepScore {
            step_index: self.step_index,
            kind: self.kind,
            score: self.score,
            n_samples: self.n_samples,
            verdicts: self
                .verdicts
                .iter()
                .map(|v| Verdict::new(self.kind, v.value, "", v.parse_ok))
                .collect(),
        }
    }
}

pub fn write_scores_jsonl(path: &Path, records: &[ScoreRecord]) -> Result<(), VerifierError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut file, record)
            .map_err(|e| VerifierError::Parse { line: 0, source: e })?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_scores_jsonl(path: &Path) -> Result<Vec<ScoreRecord>, VerifierError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| VerifierError::Parse {
                line: i + 1,
                source: e,
            })?,
        );
    }
    Ok(records)
}
