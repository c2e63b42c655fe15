//! Scripted corpus with planted step defects, shared by the integration
//! suites. Every problem carries five chains: a clean one, one with an
//! irrelevant step, one with a contradiction, one with a wrong marker
//! calculation, and a clean-but-wrong one with worse perplexity.

// Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use chaincheck::backend::ScriptSample;
use chaincheck::chain::{AnswerType, Problem, TokenLogprob};
use chaincheck::harness::generation_prompt;
use chaincheck::verifiers::PromptCatalog;

pub mod reference;

pub struct PlantedCorpus {
    pub problems: Vec<Problem>,
    pub script: Vec<(String, Vec<ScriptSample>)>,
    /// Chain-id suffix the top-verifier selection must pick per problem.
    pub expected_suffix: &'static str,
    /// Aggregates of problem 0's five chains under default weights.
    pub expected_aggregates: [f64; 5],
}

struct ChainSpec {
    steps: Vec<String>,
    token_prob: f64,
    /// Indices of steps the relevance verifier rejects.
    irrelevant: Vec<usize>,
    /// Indices of steps the consistency verifier rejects.
    contradicting: Vec<usize>,
}

fn tokens_for(text: &str, prob: f64) -> Vec<TokenLogprob> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        word.push(ch);
        if ch.is_whitespace() {
            tokens.push(TokenLogprob {
                text: std::mem::take(&mut word),
                logprob: prob.ln(),
            });
        }
    }
    if !word.is_empty() {
        tokens.push(TokenLogprob {
            text: word,
            logprob: prob.ln(),
        });
    }
    tokens
}

fn chain_specs(k: usize) -> Vec<ChainSpec> {
    let a = k + 3;
    let b = k + 2;
    let gold = a + b;
    vec![
        ChainSpec {
            steps: vec![
                format!("Ava starts with {a} apples in her basket."),
                format!("Buying {b} more gives <<{a}+{b}={gold}>>{gold} apples."),
                format!("The answer is {gold}."),
            ],
            token_prob: 0.8,
            irrelevant: vec![],
            contradicting: vec![],
        },
        ChainSpec {
            steps: vec![
                format!("Ava starts with {a} apples in her pocket."),
                format!("Ben keeps {} oranges in his garage.", k + 7),
                format!("So the answer is {}.", gold + 1),
            ],
            token_prob: 0.7,
            irrelevant: vec![1],
            contradicting: vec![],
        },
        ChainSpec {
            steps: vec![
                format!("Ava begins the day with {a} apples."),
                format!("She buys {b} more apples at the market."),
                format!(
                    "Since she bought {} apples, the answer is {}.",
                    b + 2,
                    gold + 2
                ),
            ],
            token_prob: 0.7,
            irrelevant: vec![],
            contradicting: vec![2],
        },
        ChainSpec {
            steps: vec![
                format!("Ava owns {a} apples at the start."),
                format!(
                    "Adding the purchase gives <<{a}+{b}={}>>{} apples.",
                    gold - 1,
                    gold - 1
                ),
                format!("Thus the answer is {}.", gold - 1),
            ],
            token_prob: 0.7,
            irrelevant: vec![],
            contradicting: vec![],
        },
        ChainSpec {
            steps: vec![
                format!("Ava holds {a} apples to begin."),
                "After the purchase she counts the fruit again.".to_string(),
                format!("In the end the answer is {}.", gold + 3),
            ],
            token_prob: 0.5,
            irrelevant: vec![],
            contradicting: vec![],
        },
    ]
}

/// Geometric mean of three step scores with one floored failure.
fn gm_one_failure(eps: f64) -> f64 {
    (eps.ln() / 3.0).exp()
}

pub fn planted_corpus(n_problems: usize) -> PlantedCorpus {
    let catalog = PromptCatalog::default();
    let mut problems = Vec::with_capacity(n_problems);
    let mut script: Vec<(String, Vec<ScriptSample>)> = Vec::new();

    for k in 0..n_problems {
        let a = k + 3;
        let b = k + 2;
        let question =
            format!("Ava has {a} apples and buys {b} more. How many apples does Ava have now?");
        problems.push(Problem {
            id: format!("p{k:02}"),
            question: question.clone(),
            gold_answer: (a + b).to_string(),
            answer_type: AnswerType::Numeric,
            choices: None,
        });

        let specs = chain_specs(k);
        let generations: Vec<ScriptSample> = specs
            .iter()
            .map(|spec| {
                let text = spec.steps.join("\n");
                ScriptSample {
                    tokens: Some(tokens_for(&text, spec.token_prob)),
                    text,
                }
            })
            .collect();
        script.push((generation_prompt(&question), generations));

        for spec in &specs {
            for (i, step) in spec.steps.iter().enumerate() {
                let previous = spec.steps[..i].join("\n");
                let relevance = if spec.irrelevant.contains(&i) {
                    "no, this step is not relevant to the problem"
                } else {
                    "yes, the solution is relevant"
                };
                script.push((
                    catalog.relevance_prompt(&question, &previous, step),
                    vec![ScriptSample::text_only(relevance)],
                ));
                let consistency = if spec.contradicting.contains(&i) {
                    "contradicting the information in the Previous Steps"
                } else {
                    "consistent with the previous steps"
                };
                script.push((
                    catalog.consistency_prompt(&previous, step),
                    vec![ScriptSample::text_only(consistency)],
                ));
                // Marker steps are checked deterministically and never
                // reach the backend; the rest get an empty extraction.
                if !step.contains("<<") {
                    script.push((catalog.math_prompt(step), vec![ScriptSample::text_only("")]));
                }
            }
        }
    }

    let eps = 1e-4;
    let defect = gm_one_failure(eps);
    let expected_aggregates = [
        (2.0 * 0.8 + 1.0 + 1.0 + 1.0) / 5.0,
        (2.0 * 0.7 + defect + 1.0 + 1.0) / 5.0,
        (2.0 * 0.7 + 1.0 + defect + 1.0) / 5.0,
        (2.0 * 0.7 + 1.0 + 1.0 + defect) / 5.0,
        (2.0 * 0.5 + 1.0 + 1.0 + 1.0) / 5.0,
    ];
    PlantedCorpus {
        problems,
        script,
        expected_suffix: "-c00",
        expected_aggregates,
    }
}

/// Write the corpus as dataset + script JSONL files and an experiment
/// config pointing at them; returns the config path.
pub fn write_corpus_files(
    corpus: &PlantedCorpus,
    dir: &std::path::Path,
    trials: usize,
) -> std::path::PathBuf {
    use chaincheck::backend::ScriptedBackend;

    let dataset = dir.join("problems.jsonl");
    let mut lines = String::new();
    for problem in &corpus.problems {
        lines.push_str(&serde_json::to_string(problem).unwrap());
        lines.push('\n');
    }
    std::fs::write(&dataset, lines).unwrap();

    let script_path = dir.join("script.jsonl");
    ScriptedBackend::write_script(&script_path, &corpus.script).unwrap();

    let config = serde_json::json!({
        "dataset_path": dataset,
        "backend": {
            "kind": "scripted",
            "script_path": script_path,
            "max_concurrent_requests": 1,
            "retry": {"max_attempts": 1, "backoff_ms": 1}
        },
        "n_chains": 5,
        "verifiers": ["perplexity", "relevance", "consistency", "math_accuracy"],
        "n_samples": 2,
        "selection": "top_verifier",
        "prefix": {"mode": "all"},
        "trials": trials,
        "seed": 7,
        "max_tokens": 256,
        "verifier_max_tokens": 64
    });
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    config_path
}
