//! Dataset ingestion, answer extraction and normalization, accuracy,
//! Pearson correlation, and the multi-trial experiment runner.

mod experiment;

pub use experiment::{
    ablate, build_pool, pools_from_parts, restrict_pool, run_trials_on_pool, AblationRow,
    ExperimentConfig, ModeRow, PoolBuilder, ProblemPool, ProblemRecord, Provenance, Report,
    ScoredChain, SelectionMode, VoteMode, VoteSpec,
};

use std::io::BufRead;
use std::path::Path;
use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::BackendError;
use crate::chain::{AnswerType, ChainError, Choice, Problem};
use crate::scoring::ScoringError;
use crate::verifiers::VerifierError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset line {line}: {detail}")]
    Schema { line: usize, detail: String },
    #[error("duplicate problem id {id:?}")]
    DuplicateId { id: String },
    #[error("cannot normalize answer {raw:?} as {answer_type:?}")]
    UnparseableAnswer {
        raw: String,
        answer_type: AnswerType,
    },
    #[error("length mismatch: {left} predictions vs {right} golds")]
    LengthMismatch { left: usize, right: usize },
    #[error("accuracy over an empty set is undefined")]
    EmptySet,
    #[error("pearson is undefined for a constant series")]
    ConstantInput,
    #[error("pearson needs at least two points")]
    TooShort,
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("harness io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Zero-shot generation prompt: the question plus the step-by-step
/// scaffold.
pub fn generation_prompt(question: &str) -> String {
    format!("Q: {question}\nA: {}.", crate::chain::SCAFFOLD_LINE)
}

/// Load problems from a JSONL file of `{id, question, answer, answer_type,
/// choices?}` records, validating invariants.
pub fn load_problems(path: &Path) -> Result<Vec<Problem>, HarnessError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut problems = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in file.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let problem: Problem = serde_json::from_str(&line).map_err(|e| HarnessError::Schema {
            line: line_no,
            detail: e.to_string(),
        })?;
        if !seen.insert(problem.id.clone()) {
            return Err(HarnessError::DuplicateId { id: problem.id });
        }
        let has_choices = problem.choices.as_ref().is_some_and(|c| !c.is_empty());
        if (problem.answer_type == AnswerType::MultipleChoice) != has_choices {
            return Err(HarnessError::Schema {
                line: line_no,
                detail: "choices must be present iff answer_type is multiple_choice".into(),
            });
        }
        normalize_answer(&problem.gold_answer, problem.answer_type).map_err(|_| {
            HarnessError::Schema {
                line: line_no,
                detail: format!(
                    "gold answer {:?} is not normalizable as {:?}",
                    problem.gold_answer, problem.answer_type
                ),
            }
        })?;
        problems.push(problem);
    }
    Ok(problems)
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\$?\d[\d,]*(?:\.\d+)?%?").unwrap())
}

fn choice_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Parenthesized labels in any case, bare labels only in uppercase so
    // the article "a" never reads as a choice.
    RE.get_or_init(|| {
        Regex::new(r"\(([A-Fa-f])\)|(?:^|[\s.,:;!?])([A-F])(?:[\s.,:;!?)]|$)").unwrap()
    })
}

fn yes_no_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap())
}

/// Byte offset just past the last answer cue, if any. Cues are "answer is"
/// and "answer:", falling back to a final line that carries an '='.
fn cue_region(text: &str) -> Option<usize> {
    let lower = text.to_lowercase();
    let from_phrase = ["answer is", "answer:"]
        .iter()
        .filter_map(|cue| lower.rfind(cue).map(|p| p + cue.len()))
        .max();
    if from_phrase.is_some() {
        return from_phrase;
    }
    let final_line = text.trim_end().lines().last()?;
    let eq = final_line.rfind('=')?;
    let line_start = text.trim_end().len() - final_line.len();
    Some(line_start + eq + 1)
}

fn last_match(re: &Regex, text: &str) -> Option<String> {
    re.captures_iter(text).last().map(|c| {
        c.iter()
            .skip(1)
            .flatten()
            .next()
            .map(|m| m.as_str().to_string())
            .unwrap_or_else(|| c.get(0).unwrap().as_str().to_string())
    })
}

/// Pull the raw final answer out of a generation. `None` signals a miss and
/// is scored incorrect.
pub fn extract_answer(
    raw_text: &str,
    answer_type: AnswerType,
    choices: Option<&[Choice]>,
) -> Option<String> {
    let _ = choices;
    let cue = cue_region(raw_text);
    let region = cue.map(|p| &raw_text[p..]);
    match answer_type {
        AnswerType::Numeric => region
            .and_then(|r| last_match(number_re(), r))
            .or_else(|| last_match(number_re(), raw_text)),
        AnswerType::MultipleChoice => region
            .and_then(|r| last_match(choice_re(), r))
            .or_else(|| last_match(choice_re(), raw_text)),
        AnswerType::YesNo => region
            .and_then(|r| last_match(yes_no_re(), r))
            .or_else(|| last_match(yes_no_re(), raw_text)),
        AnswerType::String => {
            let mut tail = region?.trim();
            loop {
                let stripped = tail
                    .trim_matches(|c: char| c == '"' || c == '\'' || c == '`')
                    .trim_end_matches(['.', '!', '?', ',', ';', ':'])
                    .trim();
                if stripped == tail {
                    break;
                }
                tail = stripped;
            }
            if tail.is_empty() {
                None
            } else {
                Some(tail.to_string())
            }
        }
    }
}

/// Canonicalize an answer for exact-match comparison.
pub fn normalize_answer(raw: &str, answer_type: AnswerType) -> Result<String, HarnessError> {
    let fail = || HarnessError::UnparseableAnswer {
        raw: raw.to_string(),
        answer_type,
    };
    match answer_type {
        AnswerType::Numeric => {
            let cleaned: String = raw
                .chars()
                .filter(|c| !matches!(c, '$' | ',' | '%') && !c.is_whitespace())
                .collect();
            let value: f64 = cleaned.parse().map_err(|_| fail())?;
            if !value.is_finite() {
                return Err(fail());
            }
            let value = if value == 0.0 { 0.0 } else { value }; // collapse -0
            Ok(format!("{value}"))
        }
        AnswerType::MultipleChoice => {
            let cleaned: Vec<char> = raw
                .chars()
                .filter(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | '.' | ':'))
                .collect();
            match cleaned.as_slice() {
                [c] if c.is_ascii_alphabetic() => Ok(c.to_ascii_uppercase().to_string()),
                _ => Err(fail()),
            }
        }
        AnswerType::YesNo => {
            let cleaned = raw.trim().trim_end_matches(['.', '!', ',']).to_lowercase();
            match cleaned.as_str() {
                "yes" | "no" => Ok(cleaned),
                _ => Err(fail()),
            }
        }
        AnswerType::String => {
            let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
            Ok(collapsed.to_lowercase())
        }
    }
}

/// Percentage of exact matches between canonical predictions and golds.
pub fn accuracy(predictions: &[String], golds: &[String]) -> Result<f64, HarnessError> {
    if predictions.len() != golds.len() {
        return Err(HarnessError::LengthMismatch {
            left: predictions.len(),
            right: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(HarnessError::EmptySet);
    }
    let hits = predictions
        .iter()
        .zip(golds)
        .filter(|(p, g)| p == g)
        .count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, HarnessError> {
    if xs.len() != ys.len() {
        return Err(HarnessError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(HarnessError::TooShort);
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(HarnessError::ConstantInput);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Seed a ChaCha stream from a list of identifying parts, so per-problem
/// randomness never depends on scheduling or wall clock.
pub fn derive_rng(parts: &[&str]) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0]);
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

pub fn derive_u64(parts: &[&str]) -> u64 {
    use rand::RngCore;
    derive_rng(parts).next_u64()
}
