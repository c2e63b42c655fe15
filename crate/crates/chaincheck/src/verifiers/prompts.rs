//! Prompt catalog for the constraint verifiers.
//!
//! Templates use the placeholders `{problem}`, `{previous_steps}` and
//! `{current_step}`. The shipped defaults are embedded at compile time; a
//! catalog directory with `relevance.txt`, `math_accuracy.txt` and
//! `consistency.txt` overrides them.

use std::path::Path;

use sha2::{Digest, Sha256};

const DEFAULT_RELEVANCE: &str = include_str!("../../prompts/relevance.txt");
const DEFAULT_MATH_ACCURACY: &str = include_str!("../../prompts/math_accuracy.txt");
const DEFAULT_CONSISTENCY: &str = include_str!("../../prompts/consistency.txt");

#[derive(Debug, Clone)]
pub struct PromptCatalog {
    pub relevance: String,
    pub math_accuracy: String,
    pub consistency: String,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        PromptCatalog {
            relevance: DEFAULT_RELEVANCE.to_string(),
            math_accuracy: DEFAULT_MATH_ACCURACY.to_string(),
            consistency: DEFAULT_CONSISTENCY.to_string(),
        }
    }
}

impl PromptCatalog {
    /// Load templates from a directory, one text file per verifier.
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        Ok(PromptCatalog {
            relevance: std::fs::read_to_string(dir.join("relevance.txt"))?,
            math_accuracy: std::fs::read_to_string(dir.join("math_accuracy.txt"))?,
            consistency: std::fs::read_to_string(dir.join("consistency.txt"))?,
        })
    }

    pub fn relevance_prompt(
        &self,
        problem: &str,
        previous_steps: &str,
        current_step: &str,
    ) -> String {
        fill(&self.relevance, problem, previous_steps, current_step)
    }

    pub fn math_prompt(&self, current_step: &str) -> String {
        fill(&self.math_accuracy, "", "", current_step)
    }

    pub fn consistency_prompt(&self, previous_steps: &str, current_step: &str) -> String {
        fill(&self.consistency, "", previous_steps, current_step)
    }

    /// Digest of the catalog content, recorded in report provenance.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for part in [&self.relevance, &self.math_accuracy, &self.consistency] {
            hasher.update(part.as_bytes());
            hasher.update([0]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn fill(template: &str, problem: &str, previous_steps: &str, current_step: &str) -> String {
    template
        .replace("{problem}", problem)
        .replace("{previous_steps}", previous_steps)
        .replace("{current_step}", current_step)
}
