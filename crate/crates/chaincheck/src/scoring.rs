//! Chain-level scoring (per-verifier geometric means, weighted aggregate),
//! selection strategies over chain pools, and voting ensembles.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{chain_prefix, ChainError, PrefixSpec, Problem, ReasoningChain};
use crate::verifiers::{StepScore, Verifier, VerifierError, VerifierKind};

/// Score floor applied before the geometric mean so zero verdicts stay
/// strongly penalized without annihilating the product.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Aggregate handed to chains whose scored prefix is empty: no verification
/// signal, so selection degenerates to the tie-break order.
pub const NEUTRAL_AGGREGATE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("cannot aggregate an empty score list")]
    EmptyScores,
    #[error("no weight configured for verifier {kind}")]
    MissingWeight { kind: VerifierKind },
    #[error("selection pool is empty")]
    EmptyPool,
    #[error("chain {chain_id} lacks token logprobs")]
    MissingLogprobs { chain_id: String },
    #[error("cannot vote over an empty entry list")]
    EmptyEntries,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
}

/// Per-verifier aggregation weights; all positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightConfig(pub BTreeMap<VerifierKind, f64>);

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig(BTreeMap::from([
            (VerifierKind::Perplexity, 2.0),
            (VerifierKind::Relevance, 1.0),
            (VerifierKind::Consistency, 1.0),
            (VerifierKind::MathAccuracy, 1.0),
        ]))
    }
}

impl WeightConfig {
    pub fn get(&self, kind: VerifierKind) -> Option<f64> {
        self.0.get(&kind).copied()
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        match self.0.iter().find(|(_, w)| !w.is_finite() || **w <= 0.0) {
            Some((kind, _)) => Err(ScoringError::MissingWeight { kind: *kind }),
            None => Ok(()),
        }
    }
}

/// Chain-level scores: per-verifier geometric means over steps and their
/// weighted aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainScore {
    pub chain_id: String,
    pub per_verifier: BTreeMap<VerifierKind, f64>,
    pub aggregate: f64,
    pub weights_used: BTreeMap<VerifierKind, f64>,
    pub n_steps_scored: usize,
}

/// Outcome of a vote over final answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub winner: String,
    pub tally: BTreeMap<String, f64>,
    pub tie_broken: bool,
}

/// Geometric mean of step scores with each input floored at `eps`.
pub fn chain_verifier_score(step_scores: &[f64], eps: f64) -> Result<f64, ScoringError> {
    if step_scores.is_empty() {
        return Err(ScoringError::EmptyScores);
    }
    debug_assert!(eps > 0.0);
    let log_sum: f64 = step_scores.iter().map(|s| s.max(eps).ln()).sum();
    Ok((log_sum / step_scores.len() as f64).exp())
}

/// Weighted arithmetic mean of the per-verifier chain scores, over the
/// verifiers actually present.
pub fn aggregate_score(
    per_verifier: &BTreeMap<VerifierKind, f64>,
    weights: &WeightConfig,
) -> Result<f64, ScoringError> {
    if per_verifier.is_empty() {
        return Err(ScoringError::EmptyScores);
    }
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (kind, value) in per_verifier {
        let weight = weights
            .get(*kind)
            .ok_or(ScoringError::MissingWeight { kind: *kind })?;
        numerator += weight * value;
        denominator += weight;
    }
    Ok(numerator / denominator)
}

/// Replace values by their average rank divided by the pool size, mapping
/// into (0, 1] while preserving order.
pub fn rank_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; ties share the average rank of their block.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg / n as f64;
        }
        i = j + 1;
    }
    ranks
}

/// Highest aggregate wins; ties break to the higher perplexity-verifier
/// score, then to the lower chain index.
pub fn select_top(chain_scores: &[ChainScore]) -> Result<String, ScoringError> {
    let mut best: Option<(usize, &ChainScore)> = None;
    for (index, score) in chain_scores.iter().enumerate() {
        let better = match best {
            None => true,
            Some((_, incumbent)) => {
                if score.aggregate != incumbent.aggregate {
                    score.aggregate > incumbent.aggregate
                } else {
                    let ppl = |s: &ChainScore| {
                        s.per_verifier
                            .get(&VerifierKind::Perplexity)
                            .copied()
                            .unwrap_or(f64::NEG_INFINITY)
                    };
                    ppl(score) > ppl(incumbent)
                }
            }
        };
        if better {
            best = Some((index, score));
        }
    }
    best.map(|(_, s)| s.chain_id.clone())
        .ok_or(ScoringError::EmptyPool)
}

/// Whole-chain perplexity: exp of the negated mean logprob over every token
/// of the chain.
pub fn chain_perplexity(chain: &ReasoningChain) -> Result<f64, ScoringError> {
    let logprobs = chain
        .all_token_logprobs()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| ScoringError::MissingLogprobs {
            chain_id: chain.chain_id.clone(),
        })?;
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok((-mean).exp())
}

/// Best-of-N baseline: the chain with the lowest whole-chain perplexity;
/// ties break to the lower index.
pub fn select_low_ppl(chains: &[ReasoningChain]) -> Result<String, ScoringError> {
    if chains.is_empty() {
        return Err(ScoringError::EmptyPool);
    }
    let mut best: Option<(f64, &ReasoningChain)> = None;
    for chain in chains {
        let ppl = chain_perplexity(chain)?;
        if best.as_ref().is_none_or(|(b, _)| ppl < *b) {
            best = Some((ppl, chain));
        }
    }
    Ok(best.unwrap().1.chain_id.clone())
}

/// Uniform random pick, deterministic for a given seed.
pub fn select_random(chains: &[ReasoningChain], rng_seed: u64) -> Result<String, ScoringError> {
    if chains.is_empty() {
        return Err(ScoringError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let index = rng.random_range(0..chains.len());
    Ok(chains[index].chain_id.clone())
}

fn run_vote(entries: &[(String, f64)]) -> Result<VoteResult, ScoringError> {
    if entries.is_empty() {
        return Err(ScoringError::EmptyEntries);
    }
    debug_assert!(entries.iter().all(|(_, w)| *w >= 0.0));
    struct Bucket {
        answer: String,
        total: f64,
        max_single: f64,
        first_seen: usize,
    }
    let mut buckets: Vec<Bucket> = Vec::new();
    for (i, (answer, weight)) in entries.iter().enumerate() {
        match buckets.iter_mut().find(|b| &b.answer == answer) {
            Some(bucket) => {
                bucket.total += weight;
                bucket.max_single = bucket.max_single.max(*weight);
            }
            None => buckets.push(Bucket {
                answer: answer.clone(),
                total: *weight,
                max_single: *weight,
                first_seen: i,
            }),
        }
    }
    let top_total = buckets
        .iter()
        .map(|b| b.total)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<&Bucket> = buckets.iter().filter(|b| b.total == top_total).collect();
    let tie_broken = tied.len() > 1;
    let winner = tied
        .iter()
        .copied()
        .max_by(|a, b| {
            a.max_single
                .partial_cmp(&b.max_single)
                .unwrap()
                .then(b.first_seen.cmp(&a.first_seen))
        })
        .unwrap();
    Ok(VoteResult {
        winner: winner.answer.clone(),
        tally: buckets
            .iter()
            .map(|b| (b.answer.clone(), b.total))
            .collect(),
        tie_broken,
    })
}

/// Tally answers by verifier-score weight. Tied totals go to the answer
/// holding the single highest-weight entry, then to first-seen order.
pub fn weighted_vote(entries: &[(String, f64)]) -> Result<VoteResult, ScoringError> {
    run_vote(entries)
}

/// Unweighted majority over final answers; ties go to first-seen order.
pub fn majority_vote(answers: &[String]) -> Result<VoteResult, ScoringError> {
    if answers.is_empty() {
        return Err(ScoringError::EmptyEntries);
    }
    struct Bucket {
        answer: String,
        count: u64,
    }
    let mut buckets: Vec<Bucket> = Vec::new();
    for answer in answers {
        match buckets.iter_mut().find(|b| &b.answer == answer) {
            Some(bucket) => bucket.count += 1,
            None => buckets.push(Bucket {
                answer: answer.clone(),
                count: 1,
            }),
        }
    }
    let top = buckets.iter().map(|b| b.count).max().unwrap();
    let tie_broken = buckets.iter().filter(|b| b.count == top).count() > 1;
    let winner = buckets.iter().find(|b| b.count == top).unwrap();
    Ok(VoteResult {
        winner: winner.answer.clone(),
        tally: buckets
            .iter()
            .map(|b| (b.answer.clone(), b.count as f64))
            .collect(),
        tie_broken,
    })
}

/// Scores whole chains through the step verifiers.
pub struct ScorePipeline<'a> {
    pub verifier: &'a Verifier<'a>,
    pub kinds: Vec<VerifierKind>,
    pub n_samples: usize,
    pub weights: WeightConfig,
    pub eps: f64,
}

impl<'a> ScorePipeline<'a> {
    pub fn new(verifier: &'a Verifier<'a>, kinds: Vec<VerifierKind>) -> Self {
        ScorePipeline {
            verifier,
            kinds,
            n_samples: 5,
            weights: WeightConfig::default(),
            eps: DEFAULT_EPS,
        }
    }

    /// The verifiers applied to a problem: the math verifier only applies
    /// to numeric problems.
    pub fn effective_kinds(&self, problem: &Problem) -> Vec<VerifierKind> {
        let mut kinds: Vec<VerifierKind> = self
            .kinds
            .iter()
            .copied()
            .filter(|kind| {
                *kind != VerifierKind::MathAccuracy
                    || problem.answer_type == crate::chain::AnswerType::Numeric
            })
            .collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    pub fn score_chain(
        &self,
        problem: &Problem,
        chain: &ReasoningChain,
    ) -> Result<(ChainScore, Vec<StepScore>), ScoringError> {
        self.score_with_prefix(problem, chain, &PrefixSpec::All)
    }

    /// Run the verifiers over the leading steps named by `prefix` only. A
    /// count-0 prefix performs no verifier calls and scores a neutral 0.5.
    pub fn score_with_prefix(
        &self,
        problem: &Problem,
        chain: &ReasoningChain,
        prefix: &PrefixSpec,
    ) -> Result<(ChainScore, Vec<StepScore>), ScoringError> {
        let prefixed = chain_prefix(chain, prefix)?;
        if prefixed.is_unscored() {
            return Ok((
                ChainScore {
                    chain_id: chain.chain_id.clone(),
                    per_verifier: BTreeMap::new(),
                    aggregate: NEUTRAL_AGGREGATE,
                    weights_used: BTreeMap::new(),
                    n_steps_scored: 0,
                },
                Vec::new(),
            ));
        }

        let kinds = self.effective_kinds(problem);
        let mut step_scores = Vec::with_capacity(prefixed.steps.len() * kinds.len());
        for (i, step) in prefixed.steps.iter().enumerate() {
            let previous = &prefixed.steps[..i];
            for kind in &kinds {
                let score = match kind {
                    VerifierKind::Relevance => self.verifier.verify_relevance(
                        &problem.question,
                        previous,
                        step,
                        self.n_samples,
                    )?,
                    VerifierKind::Consistency => {
                        self.verifier
                            .verify_consistency(previous, step, self.n_samples)?
                    }
                    VerifierKind::MathAccuracy => {
                        self.verifier.verify_math(step, self.n_samples)?
                    }
                    VerifierKind::Perplexity => self.verifier.perplexity(step)?,
                };
                step_scores.push(score);
            }
        }
        let chain_score = reduce_chain_score(
            &chain.chain_id,
            &step_scores,
            &kinds,
            &self.weights,
            self.eps,
            prefixed.steps.len(),
        )?;
        Ok((chain_score, step_scores))
    }
}

/// Fold per-step scores into a ChainScore: geometric mean per verifier,
/// then the weighted aggregate.
pub fn reduce_chain_score(
    chain_id: &str,
    step_scores: &[StepScore],
    kinds: &[VerifierKind],
    weights: &WeightConfig,
    eps: f64,
    n_steps_scored: usize,
) -> Result<ChainScore, ScoringError> {
    let mut per_verifier = BTreeMap::new();
    for kind in kinds {
        let values: Vec<f64> = step_scores
            .iter()
            .filter(|s| s.kind == *kind)
            .map(|s| s.score)
            .collect();
        if values.is_empty() {
            continue;
        }
        per_verifier.insert(*kind, chain_verifier_score(&values, eps)?);
    }
    let aggregate = aggregate_score(&per_verifier, weights)?;
    let weights_used = per_verifier
        .keys()
        .map(|kind| (*kind, weights.get(*kind).unwrap()))
        .collect();
    Ok(ChainScore {
        chain_id: chain_id.to_string(),
        per_verifier,
        aggregate,
        weights_used,
        n_steps_scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{AnswerType, ReasoningStep, TokenLogprob};

    fn chain_with_ppl(id: &str, texts: &[&str], token_prob: f64) -> ReasoningChain {
        let raw = texts.join("\n");
        let mut chain = ReasoningChain::new(id, "p0", raw).unwrap();
        for step in &mut chain.steps {
            step.token_logprobs = Some(vec![token_prob.ln(); 4]);
        }
        chain
    }

    fn score_of(id: &str, aggregate: f64, ppl: Option<f64>) -> ChainScore {
        let mut per_verifier = BTreeMap::new();
        if let Some(p) = ppl {
            per_verifier.insert(VerifierKind::Perplexity, p);
        }
        ChainScore {
            chain_id: id.to_string(),
            per_verifier,
            aggregate,
            weights_used: BTreeMap::new(),
            n_steps_scored: 1,
        }
    }

    #[test]
    fn gm_identity() {
        assert_eq!(
            chain_verifier_score(&[1.0, 1.0, 1.0], DEFAULT_EPS).unwrap(),
            1.0
        );
    }

    #[test]
    fn gm_sqrt_case() {
        let gm = chain_verifier_score(&[0.25, 1.0], DEFAULT_EPS).unwrap();
        assert!((gm - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gm_floors_zeros() {
        let gm = chain_verifier_score(&[0.9, 0.0, 0.9], 1e-4).unwrap();
        let expected = (0.9f64 * 1e-4 * 0.9).powf(1.0 / 3.0);
        assert!((gm - expected).abs() < 1e-12, "{gm} vs {expected}");
        assert!((gm - 0.0433).abs() < 5e-4);
    }

    #[test]
    fn gm_empty_is_error() {
        assert!(matches!(
            chain_verifier_score(&[], DEFAULT_EPS),
            Err(ScoringError::EmptyScores)
        ));
    }

    #[test]
    fn gm_bounded_by_floored_min_and_max() {
        let values = [0.3, 0.7, 0.0, 1.0];
        let gm = chain_verifier_score(&values, DEFAULT_EPS).unwrap();
        let floored: Vec<f64> = values.iter().map(|v| v.max(DEFAULT_EPS)).collect();
        let min = floored.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = floored.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(gm >= min - 1e-12 && gm <= max + 1e-12);
    }

    #[test]
    fn aggregate_default_weighting() {
        let per = BTreeMap::from([
            (VerifierKind::Perplexity, 0.8),
            (VerifierKind::Relevance, 1.0),
            (VerifierKind::MathAccuracy, 0.5),
            (VerifierKind::Consistency, 1.0),
        ]);
        let agg = aggregate_score(&per, &WeightConfig::default()).unwrap();
        assert!((agg - 0.82).abs() < 1e-12);
    }

    #[test]
    fn aggregate_all_ones_is_one() {
        let per = BTreeMap::from([
            (VerifierKind::Perplexity, 1.0),
            (VerifierKind::Relevance, 1.0),
        ]);
        assert_eq!(
            aggregate_score(&per, &WeightConfig::default()).unwrap(),
            1.0
        );
    }

    #[test]
    fn aggregate_skips_absent_math() {
        let per = BTreeMap::from([
            (VerifierKind::Perplexity, 0.6),
            (VerifierKind::Relevance, 0.9),
            (VerifierKind::Consistency, 0.3),
        ]);
        let agg = aggregate_score(&per, &WeightConfig::default()).unwrap();
        assert!((agg - 0.6).abs() < 1e-12);
    }

    #[test]
    fn aggregate_missing_weight_errors() {
        let per = BTreeMap::from([(VerifierKind::Relevance, 0.9)]);
        let weights = WeightConfig(BTreeMap::from([(VerifierKind::Perplexity, 2.0)]));
        assert!(matches!(
            aggregate_score(&per, &weights),
            Err(ScoringError::MissingWeight {
                kind: VerifierKind::Relevance
            })
        ));
    }

    #[test]
    fn select_top_argmax() {
        let scores = vec![
            score_of("c0", 0.5, None),
            score_of("c1", 0.9, None),
            score_of("c2", 0.7, None),
        ];
        assert_eq!(select_top(&scores).unwrap(), "c1");
    }

    #[test]
    fn select_top_tie_breaks_on_ppl_then_index() {
        let scores = vec![
            score_of("c0", 0.8, Some(0.6)),
            score_of("c1", 0.8, Some(0.7)),
        ];
        assert_eq!(select_top(&scores).unwrap(), "c1");
        let scores = vec![
            score_of("c0", 0.8, Some(0.7)),
            score_of("c1", 0.8, Some(0.7)),
        ];
        assert_eq!(select_top(&scores).unwrap(), "c0");
        assert!(matches!(select_top(&[]), Err(ScoringError::EmptyPool)));
    }

    #[test]
    fn low_ppl_argmin() {
        let chains = vec![
            chain_with_ppl("c0", &["a a"], 0.30),
            chain_with_ppl("c1", &["b b"], 0.45),
            chain_with_ppl("c2", &["c c"], 0.20),
        ];
        // Highest token probability = lowest perplexity.
        assert_eq!(select_low_ppl(&chains).unwrap(), "c1");
    }

    #[test]
    fn low_ppl_tie_takes_lower_index() {
        let chains = vec![
            chain_with_ppl("c0", &["a a"], 0.4),
            chain_with_ppl("c1", &["b b"], 0.4),
        ];
        assert_eq!(select_low_ppl(&chains).unwrap(), "c0");
    }

    #[test]
    fn low_ppl_requires_logprobs() {
        let mut chains = vec![chain_with_ppl("c0", &["a"], 0.4)];
        chains.push(ReasoningChain::new("c1", "p0", "bare").unwrap());
        assert!(matches!(
            select_low_ppl(&chains),
            Err(ScoringError::MissingLogprobs { .. })
        ));
    }

    #[test]
    fn random_is_seed_deterministic() {
        let chains: Vec<ReasoningChain> = (0..4)
            .map(|i| ReasoningChain::new(format!("c{i}"), "p0", "text").unwrap())
            .collect();
        assert_eq!(
            select_random(&chains, 11).unwrap(),
            select_random(&chains, 11).unwrap()
        );
        let single = vec![ReasoningChain::new("only", "p0", "text").unwrap()];
        assert_eq!(select_random(&single, 0).unwrap(), "only");
    }

    #[test]
    fn random_is_roughly_uniform() {
        let chains: Vec<ReasoningChain> = (0..4)
            .map(|i| ReasoningChain::new(format!("c{i}"), "p0", "text").unwrap())
            .collect();
        let mut counts = BTreeMap::new();
        for seed in 0..10_000u64 {
            *counts
                .entry(select_random(&chains, seed).unwrap())
                .or_insert(0usize) += 1;
        }
        for (_, count) in counts {
            let freq = count as f64 / 10_000.0;
            assert!((freq - 0.25).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn weighted_vote_overrides_majority() {
        let entries = vec![
            ("5".to_string(), 0.2),
            ("5".to_string(), 0.2),
            ("7".to_string(), 0.9),
        ];
        let result = weighted_vote(&entries).unwrap();
        assert_eq!(result.winner, "7");
        assert_eq!(result.tally["5"], 0.4);
    }

    #[test]
    fn weighted_vote_tally_example() {
        let entries = vec![
            ("5".to_string(), 0.4),
            ("7".to_string(), 0.9),
            ("5".to_string(), 0.3),
        ];
        let result = weighted_vote(&entries).unwrap();
        assert_eq!(result.winner, "7");
        assert!(!result.tie_broken);
    }

    #[test]
    fn weighted_vote_tie_breaks_on_highest_single_entry() {
        let entries = vec![
            ("a".to_string(), 0.5),
            ("b".to_string(), 0.3),
            ("b".to_string(), 0.2),
        ];
        let result = weighted_vote(&entries).unwrap();
        assert_eq!(result.winner, "a");
        assert!(result.tie_broken);
    }

    #[test]
    fn weighted_vote_final_tie_first_seen() {
        let entries = vec![("a".to_string(), 0.5), ("b".to_string(), 0.5)];
        let result = weighted_vote(&entries).unwrap();
        assert_eq!(result.winner, "a");
        assert!(result.tie_broken);
        assert!(matches!(
            weighted_vote(&[]),
            Err(ScoringError::EmptyEntries)
        ));
    }

    #[test]
    fn majority_vote_examples() {
        let answers: Vec<String> = ["5", "7", "5"].iter().map(|s| s.to_string()).collect();
        assert_eq!(majority_vote(&answers).unwrap().winner, "5");
        let answers: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let result = majority_vote(&answers).unwrap();
        assert_eq!(result.winner, "a");
        assert!(result.tie_broken);
        let answers = vec!["x".to_string()];
        assert_eq!(majority_vote(&answers).unwrap().winner, "x");
    }

    #[test]
    fn rank_normalize_orders_and_averages_ties() {
        let ranks = rank_normalize(&[0.2, 0.9, 0.5]);
        let expected = [1.0 / 3.0, 1.0, 2.0 / 3.0];
        for (r, e) in ranks.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12);
        }
        let tied = rank_normalize(&[0.4, 0.4]);
        assert_eq!(tied, vec![0.75, 0.75]);
    }

    #[test]
    fn effective_kinds_drops_math_for_non_numeric() {
        use crate::backend::ScriptedBackend;
        use crate::verifiers::PromptCatalog;
        let backend = ScriptedBackend::from_entries("scripted:test", []);
        let catalog = PromptCatalog::default();
        let verifier = Verifier::new(&backend, &catalog);
        let pipeline = ScorePipeline::new(&verifier, VerifierKind::ALL.to_vec());
        let mut problem = Problem {
            id: "p".into(),
            question: "q".into(),
            gold_answer: "yes".into(),
            answer_type: AnswerType::YesNo,
            choices: None,
        };
        assert!(!pipeline
            .effective_kinds(&problem)
            .contains(&VerifierKind::MathAccuracy));
        problem.answer_type = AnswerType::Numeric;
        assert!(pipeline
            .effective_kinds(&problem)
            .contains(&VerifierKind::MathAccuracy));
    }

    #[test]
    fn prefix_count_zero_scores_neutral_with_no_calls() {
        use crate::backend::ScriptedBackend;
        use crate::verifiers::PromptCatalog;
        let backend = ScriptedBackend::from_entries("scripted:test", []);
        let catalog = PromptCatalog::default();
        let verifier = Verifier::new(&backend, &catalog);
        let pipeline = ScorePipeline::new(
            &verifier,
            vec![VerifierKind::Relevance, VerifierKind::Consistency],
        );
        let problem = Problem {
            id: "p".into(),
            question: "q".into(),
            gold_answer: "1".into(),
            answer_type: AnswerType::Numeric,
            choices: None,
        };
        let chain = ReasoningChain::new("c0", "p", "a\nb\nc").unwrap();
        let (score, steps) = pipeline
            .score_with_prefix(&problem, &chain, &PrefixSpec::Count(0))
            .unwrap();
        assert_eq!(score.aggregate, NEUTRAL_AGGREGATE);
        assert_eq!(score.n_steps_scored, 0);
        assert!(steps.is_empty());
        assert_eq!(backend.calls(), 0);
    }

    fn step(index: usize) -> ReasoningStep {
        ReasoningStep {
            index,
            text: format!("step {index}"),
            token_logprobs: None,
        }
    }

    #[test]
    fn appending_perfect_step_never_decreases_gm() {
        let base = [0.5, 0.8];
        let with_one = [0.5, 0.8, 1.0];
        let with_zero = [0.5, 0.8, 0.0];
        let gm0 = chain_verifier_score(&base, DEFAULT_EPS).unwrap();
        let gm1 = chain_verifier_score(&with_one, DEFAULT_EPS).unwrap();
        let gm2 = chain_verifier_score(&with_zero, DEFAULT_EPS).unwrap();
        assert!(gm1 >= gm0 - 1e-12);
        assert!(gm2 < gm0);
        let _ = step(0);
    }

    #[test]
    fn token_logprob_type_is_shared() {
        // reduce_chain_score over mixed kinds respects kind filtering.
        let scores = vec![
            StepScore {
                step_index: 0,
                kind: VerifierKind::Relevance,
                score: 1.0,
                n_samples: 1,
                verdicts: vec![],
            },
            StepScore {
                step_index: 0,
                kind: VerifierKind::Perplexity,
                score: 0.25,
                n_samples: 1,
                verdicts: vec![],
            },
        ];
        let cs = reduce_chain_score(
            "c0",
            &scores,
            &[VerifierKind::Relevance, VerifierKind::Perplexity],
            &WeightConfig::default(),
            DEFAULT_EPS,
            1,
        )
        .unwrap();
        assert_eq!(cs.per_verifier[&VerifierKind::Relevance], 1.0);
        assert_eq!(cs.per_verifier[&VerifierKind::Perplexity], 0.25);
        // (2*0.25 + 1*1.0)/3
        assert!((cs.aggregate - 0.5).abs() < 1e-12);
        let _ = TokenLogprob {
            text: "t".into(),
            logprob: -0.1,
        };
    }
}
