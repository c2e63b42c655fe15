//! Domain types for problems, reasoning steps and reasoning chains, plus
//! step splitting, prefix truncation and token-to-step alignment.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The scaffold line appended to generation prompts. Lines equal to it are
/// excluded from scoring, like blank lines.
pub const SCAFFOLD_LINE: &str = "Let's think step by step";

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("no non-empty reasoning step remains after splitting")]
    EmptyChain,
    #[error("invalid prefix spec: {0}")]
    InvalidSpec(String),
    #[error("token stream does not align with chain text: {0}")]
    AlignmentError(String),
    #[error("chain io: {0}")]
    Io(#[from] std::io::Error),
    #[error("chain line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// How a gold answer is interpreted and normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Numeric,
    MultipleChoice,
    YesNo,
    String,
}

/// One labelled option of a multiple-choice problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub text: String,
}

/// A question with its gold answer; the unit of evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub question: String,
    #[serde(rename = "answer")]
    pub gold_answer: String,
    pub answer_type: AnswerType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<Choice>>,
}

/// One token of a completion together with its natural-log probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub text: String,
    pub logprob: f64,
}

/// One line of a reasoning chain; the unit of verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
}

/// An ordered sequence of reasoning steps produced by a generator for one
/// problem; the unit of scoring and selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningChain {
    pub chain_id: String,
    pub problem_id: String,
    pub raw_text: String,
    pub steps: Vec<ReasoningStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_answer: Option<String>,
}

/// How much of a chain to keep when verifying incomplete chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "amount", rename_all = "snake_case")]
pub enum PrefixSpec {
    /// Keep the first ceil(amount/100 * n) steps; amount in (0, 100].
    Percent(f64),
    /// Keep the first min(amount, n) steps; 0 yields an unscored chain.
    Count(usize),
    /// Identity.
    All,
}

impl PrefixSpec {
    pub fn validate(&self) -> Result<(), ChainError> {
        match *self {
            PrefixSpec::Percent(p) if !(p > 0.0 && p <= 100.0) => Err(ChainError::InvalidSpec(
                format!("percent must lie in (0, 100], got {p}"),
            )),
            _ => Ok(()),
        }
    }

    /// Number of steps kept out of `n`.
    pub fn keep(&self, n: usize) -> Result<usize, ChainError> {
        self.validate()?;
        Ok(match *self {
            PrefixSpec::Percent(p) => ((p / 100.0) * n as f64).ceil() as usize,
            PrefixSpec::Count(c) => c.min(n),
            PrefixSpec::All => n,
        })
    }
}

fn is_scaffold(line: &str) -> bool {
    let trimmed = line.trim_end_matches(['.', ':']);
    trimmed.eq_ignore_ascii_case(SCAFFOLD_LINE)
}

fn is_kept_line(line: &str) -> bool {
    !line.is_empty() && !is_scaffold(line)
}

/// Split raw generated text into reasoning steps: one step per line, lines
/// trimmed, blank lines and scaffold lines dropped, indices contiguous.
pub fn split_steps(raw_text: &str) -> Result<Vec<ReasoningStep>, ChainError> {
    let steps: Vec<ReasoningStep> = raw_text
        .lines()
        .map(str::trim)
        .filter(|line| is_kept_line(line))
        .enumerate()
        .map(|(index, text)| ReasoningStep {
            index,
            text: text.to_string(),
            token_logprobs: None,
        })
        .collect();
    if steps.is_empty() {
        return Err(ChainError::EmptyChain);
    }
    Ok(steps)
}

impl ReasoningChain {
    pub fn new(
        chain_id: impl Into<String>,
        problem_id: impl Into<String>,
        raw_text: impl Into<String>,
    ) -> Result<Self, ChainError> {
        let raw_text = raw_text.into();
        let steps = split_steps(&raw_text)?;
        Ok(ReasoningChain {
            chain_id: chain_id.into(),
            problem_id: problem_id.into(),
            raw_text,
            steps,
            extracted_answer: None,
        })
    }

    /// True when the chain carries no steps to score (count-0 prefix).
    pub fn is_unscored(&self) -> bool {
        self.steps.is_empty()
    }

    /// Logprobs of every token of the chain in step order, or None if any
    /// step lacks them.
    pub fn all_token_logprobs(&self) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        for step in &self.steps {
            out.extend(step.token_logprobs.as_ref()?);
        }
        Some(out)
    }
}

/// Keep only the leading steps named by `spec`. A count of 0 produces a
/// chain with no steps, flagged via `is_unscored`, never `EmptyChain`.
pub fn chain_prefix(
    chain: &ReasoningChain,
    spec: &PrefixSpec,
) -> Result<ReasoningChain, ChainError> {
    let keep = spec.keep(chain.steps.len())?;
    let mut out = chain.clone();
    out.steps.truncate(keep);
    Ok(out)
}

/// Attach per-token logprobs to the steps of `chain`.
///
/// Tokens are matched to the chain text positionally over non-whitespace
/// characters, so whitespace-only differences between the token stream and
/// the raw text are tolerated. A token belongs to the step containing its
/// first non-whitespace character; whitespace-only tokens (newlines) join
/// the preceding step.
pub fn assign_token_logprobs(
    chain: &ReasoningChain,
    tokens: &[TokenLogprob],
) -> Result<ReasoningChain, ChainError> {
    // Map each non-whitespace char of raw_text to its step (or None for
    // dropped lines), in reading order.
    let mut char_step: Vec<Option<usize>> = Vec::new();
    let mut step_iter = chain.steps.iter().peekable();
    for line in chain.raw_text.lines() {
        let trimmed = line.trim();
        let step_idx = match step_iter.peek() {
            Some(step) if is_kept_line(trimmed) && step.text == trimmed => {
                let idx = step.index;
                step_iter.next();
                Some(idx)
            }
            _ => None,
        };
        for ch in line.chars().filter(|c| !c.is_whitespace()) {
            let _ = ch;
            char_step.push(step_idx);
        }
    }
    if step_iter.next().is_some() {
        return Err(ChainError::AlignmentError(
            "chain steps do not match raw_text lines".into(),
        ));
    }

    let raw_stripped: String = chain
        .raw_text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let tok_stripped: String = tokens
        .iter()
        .flat_map(|t| t.text.chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    if raw_stripped != tok_stripped {
        return Err(ChainError::AlignmentError(format!(
            "token concatenation differs from raw_text ({} vs {} non-whitespace chars)",
            tok_stripped.chars().count(),
            raw_stripped.chars().count(),
        )));
    }

    let mut per_step: Vec<Vec<f64>> = vec![Vec::new(); chain.steps.len()];
    let mut pos = 0usize; // index into char_step
    let mut last_step: Option<usize> = None;
    for token in tokens {
        let n_chars = token.text.chars().filter(|c| !c.is_whitespace()).count();
        let target = if n_chars == 0 {
            // Whitespace-only token: attach to the preceding step, or the
            // first step when nothing precedes it.
            last_step.or(if chain.steps.is_empty() {
                None
            } else {
                Some(0)
            })
        } else {
            let t = char_step[pos];
            pos += n_chars;
            t
        };
        if let Some(idx) = target {
            per_step[idx].push(token.logprob);
            last_step = Some(idx);
        }
    }

    let mut out = chain.clone();
    for (step, lps) in out.steps.iter_mut().zip(per_step) {
        step.token_logprobs = if lps.is_empty() { None } else { Some(lps) };
    }
    Ok(out)
}

/// Write chains as JSONL, one object per chain.
pub fn write_chains_jsonl(path: &Path, chains: &[ReasoningChain]) -> Result<(), ChainError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for chain in chains {
        serde_json::to_writer(&mut file, chain)
            .map_err(|e| ChainError::Parse { line: 0, source: e })?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

/// Read chains from a JSONL file written by `write_chains_jsonl`.
pub fn read_chains_jsonl(path: &Path) -> Result<Vec<ReasoningChain>, ChainError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut chains = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let chain: ReasoningChain = serde_json::from_str(&line).map_err(|e| ChainError::Parse {
            line: i + 1,
            source: e,
        })?;
        chains.push(chain);
    }
    Ok(chains)
}
