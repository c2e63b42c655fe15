//! Experiment orchestration: chain generation, pool scoring, multi-trial
//! selection with mean and std reporting, and ablation sweeps.

use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    accuracy, derive_rng, derive_u64, extract_answer, generation_prompt, normalize_answer,
    HarnessError,
};
use crate::backend::BackendConfig;
use crate::backend::{Backend, CacheStats, CompletionRequest, ResponseCache};
use crate::chain::{assign_token_logprobs, PrefixSpec, Problem, ReasoningChain};
use crate::mathcheck::ToleranceSpec;
use crate::scoring::{
    aggregate_score, chain_perplexity, majority_vote, rank_normalize, reduce_chain_score,
    select_low_ppl, select_random, select_top, weighted_vote, ChainScore, ScorePipeline,
    WeightConfig, DEFAULT_EPS,
};
use crate::verifiers::{
    expectation_score, PromptCatalog, SamplingParams, StepScore, Verdict, Verifier, VerifierKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Random,
    LowPpl,
    TopVerifier,
}

impl SelectionMode {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMode::Random => "random",
            SelectionMode::LowPpl => "low_ppl",
            SelectionMode::TopVerifier => "top_verifier",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    Majority,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoteSpec {
    pub mode: VoteMode,
    pub k: usize,
}

fn default_n_chains() -> usize {
    40
}

fn default_verifiers() -> Vec<VerifierKind> {
    VerifierKind::ALL.to_vec()
}

fn default_n_samples() -> usize {
    5
}

fn default_selection() -> SelectionMode {
    SelectionMode::TopVerifier
}

fn default_prefix() -> PrefixSpec {
    PrefixSpec::All
}

fn default_trials() -> usize {
    20
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    512
}

fn default_verifier_max_tokens() -> u32 {
    128
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

/// Everything a full experiment run needs; loads from a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub backend: BackendConfig,
    #[serde(default = "default_n_chains")]
    pub n_chains: usize,
    #[serde(default = "default_verifiers")]
    pub verifiers: Vec<VerifierKind>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub weights: WeightConfig,
    #[serde(default = "default_selection")]
    pub selection: SelectionMode,
    #[serde(default)]
    pub vote: Option<VoteSpec>,
    #[serde(default = "default_prefix")]
    pub prefix: PrefixSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_verifier_max_tokens")]
    pub verifier_max_tokens: u32,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub ppl_rank_normalize: bool,
    #[serde(default)]
    pub tolerance: ToleranceSpec,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_chains == 0 {
            return Err(HarnessError::InvalidConfig("n_chains must be >= 1".into()));
        }
        if self.n_samples == 0 {
            return Err(HarnessError::InvalidConfig("n_samples must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be >= 1".into()));
        }
        if let Some(vote) = &self.vote {
            if vote.k == 0 || vote.k > self.n_chains {
                return Err(HarnessError::InvalidConfig(format!(
                    "vote pool size k={} must lie in 1..=n_chains={}",
                    vote.k, self.n_chains
                )));
            }
        }
        self.prefix
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.weights
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// One generated chain with its verifier scores and canonical answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredChain {
    pub chain: ReasoningChain,
    pub answer: Option<String>,
    pub step_scores: Vec<StepScore>,
    pub score: ChainScore,
}

/// All scored chains of one problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemPool {
    pub problem: Problem,
    pub gold: String,
    pub chains: Vec<ScoredChain>,
    pub failures: usize,
}

/// Generates and scores chain pools against a backend.
pub struct PoolBuilder<'a> {
    pub backend: &'a dyn Backend,
    pub cache: Option<&'a ResponseCache>,
    pub catalog: &'a PromptCatalog,
    pub config: &'a ExperimentConfig,
}

impl PoolBuilder<'_> {
    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<crate::backend::Completion, HarnessError> {
        Ok(match self.cache {
            Some(cache) => cache.cached_complete(self.backend, request)?,
            None => self.backend.complete(request)?,
        })
    }

    /// Sample the configured number of chains for one problem. Failed
    /// generations are dropped and counted, never silently lost.
    pub fn generate_chains(
        &self,
        problem: &Problem,
    ) -> Result<(Vec<ReasoningChain>, usize), HarnessError> {
        let prompt = generation_prompt(&problem.question);
        let mut chains = Vec::with_capacity(self.config.n_chains);
        let mut failures = 0usize;
        for i in 0..self.config.n_chains {
            let request = CompletionRequest {
                prompt: prompt.clone(),
                temperature: self.config.temperature,
                max_tokens: self.config.max_tokens,
                n_logprobs: true,
                stop: None,
                seed_tag: format!("gen:{i}"),
            };
            let completion = match self.complete(&request) {
                Ok(c) => c,
                Err(HarnessError::Backend(_)) => {
                    failures += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let chain_id = format!("{}-c{i:02}", problem.id);
            let mut chain = match ReasoningChain::new(&chain_id, &problem.id, &completion.text) {
                Ok(c) => c,
                Err(_) => {
                    failures += 1;
                    continue;
                }
            };
            if let Some(tokens) = &completion.tokens {
                chain = assign_token_logprobs(&chain, tokens)?;
            }
            chain.extracted_answer = extract_answer(
                &completion.text,
                problem.answer_type,
                problem.choices.as_deref(),
            );
            chains.push(chain);
        }
        Ok((chains, failures))
    }

    /// Score already-generated chains under the configured verifier set and
    /// prefix spec.
    pub fn score_chains(
        &self,
        problem: &Problem,
        chains: Vec<ReasoningChain>,
        failures: usize,
    ) -> Result<ProblemPool, HarnessError> {
        let sampling = SamplingParams {
            temperature: self.config.temperature,
            max_tokens: self.config.verifier_max_tokens,
        };
        let mut verifier = Verifier::new(self.backend, self.catalog)
            .with_sampling(sampling)
            .with_tolerance(self.config.tolerance);
        if let Some(cache) = self.cache {
            verifier = verifier.with_cache(cache);
        }
        let pipeline = ScorePipeline {
            verifier: &verifier,
            kinds: self.config.verifiers.clone(),
            n_samples: self.config.n_samples,
            weights: self.config.weights.clone(),
            eps: self.config.eps,
        };

        let mut scored = Vec::with_capacity(chains.len());
        for chain in chains {
            let (score, step_scores) =
                pipeline.score_with_prefix(problem, &chain, &self.config.prefix)?;
            let answer = chain
                .extracted_answer
                .as_deref()
                .and_then(|raw| normalize_answer(raw, problem.answer_type).ok());
            scored.push(ScoredChain {
                chain,
                answer,
                step_scores,
                score,
            });
        }
        let mut pool = ProblemPool {
            gold: normalize_answer(&problem.gold_answer, problem.answer_type)?,
            problem: problem.clone(),
            chains: scored,
            failures,
        };
        if self.config.ppl_rank_normalize {
            rank_normalize_ppl(&mut pool, &self.config.weights)?;
        }
        Ok(pool)
    }

    pub fn problem_pool(&self, problem: &Problem) -> Result<ProblemPool, HarnessError> {
        let (chains, failures) = self.generate_chains(problem)?;
        self.score_chains(problem, chains, failures)
    }
}

/// Replace each chain's perplexity verifier score by its per-problem rank
/// and re-aggregate.
fn rank_normalize_ppl(pool: &mut ProblemPool, weights: &WeightConfig) -> Result<(), HarnessError> {
    let kind = VerifierKind::Perplexity;
    let values: Vec<f64> = pool
        .chains
        .iter()
        .filter_map(|c| c.score.per_verifier.get(&kind).copied())
        .collect();
    if values.len() != pool.chains.len() || values.is_empty() {
        return Ok(());
    }
    let ranks = rank_normalize(&values);
    for (chain, rank) in pool.chains.iter_mut().zip(ranks) {
        chain.score.per_verifier.insert(kind, rank);
        chain.score.aggregate = aggregate_score(&chain.score.per_verifier, weights)?;
    }
    Ok(())
}

/// Generate and score the pools for a problem set, problems in parallel,
/// output in problem order.
pub fn build_pool(
    builder: &PoolBuilder<'_>,
    problems: &[Problem],
) -> Result<Vec<ProblemPool>, HarnessError> {
    problems
        .par_iter()
        .map(|p| builder.problem_pool(p))
        .collect()
}

/// Reassemble scored pools from stage files (chains plus step-score
/// records) without touching the backend. Chains without any score records
/// receive the neutral aggregate.
pub fn pools_from_parts(
    problems: &[Problem],
    chains: &[ReasoningChain],
    records: &[crate::verifiers::ScoreRecord],
    config: &ExperimentConfig,
) -> Result<Vec<ProblemPool>, HarnessError> {
    use std::collections::HashMap;
    let mut by_chain: HashMap<&str, Vec<StepScore>> = HashMap::new();
    for record in records {
        by_chain
            .entry(record.chain_id.as_str())
            .or_default()
            .push(record.to_step_score());
    }

    let mut pools = Vec::with_capacity(problems.len());
    for problem in problems {
        let mut scored = Vec::new();
        for chain in chains.iter().filter(|c| c.problem_id == problem.id) {
            let step_scores = by_chain.remove(chain.chain_id.as_str()).unwrap_or_default();
            let score = if step_scores.is_empty() {
                ChainScore {
                    chain_id: chain.chain_id.clone(),
                    per_verifier: Default::default(),
                    aggregate: crate::scoring::NEUTRAL_AGGREGATE,
                    weights_used: Default::default(),
                    n_steps_scored: 0,
                }
            } else {
                let mut kinds: Vec<VerifierKind> = step_scores.iter().map(|s| s.kind).collect();
                kinds.sort();
                kinds.dedup();
                let mut indices: Vec<usize> = step_scores.iter().map(|s| s.step_index).collect();
                indices.sort_unstable();
                indices.dedup();
                reduce_chain_score(
                    &chain.chain_id,
                    &step_scores,
                    &kinds,
                    &config.weights,
                    config.eps,
                    indices.len(),
                )?
            };
            let answer = chain
                .extracted_answer
                .as_deref()
                .and_then(|raw| normalize_answer(raw, problem.answer_type).ok());
            scored.push(ScoredChain {
                chain: chain.clone(),
                answer,
                step_scores,
                score,
            });
        }
        pools.push(ProblemPool {
            gold: normalize_answer(&problem.gold_answer, problem.answer_type)?,
            problem: problem.clone(),
            chains: scored,
            failures: 0,
        });
    }
    Ok(pools)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub problem_id: String,
    pub selected_chain: Option<String>,
    pub answer: Option<String>,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: String,
    pub verifiers: Vec<VerifierKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub n_problems: usize,
    pub failures: usize,
    pub trial_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub backend_id: String,
    pub prompt_catalog_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub rows: Vec<ModeRow>,
    pub per_problem: Vec<ProblemRecord>,
}

impl Report {
    /// Flat CSV, one row per mode/subset.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("mode,verifiers,k,accuracy_mean,accuracy_std,n_problems,failures\n");
        for row in &self.rows {
            let verifiers = row
                .verifiers
                .iter()
                .map(|v| v.name())
                .collect::<Vec<_>>()
                .join("+");
            out.push_str(&format!(
                "{},{},{},{:.2},{:.2},{},{}\n",
                row.mode,
                verifiers,
                row.k.map_or(String::new(), |k| k.to_string()),
                row.accuracy_mean,
                row.accuracy_std,
                row.n_problems,
                row.failures,
            ));
        }
        out
    }
}

fn population_std(values: &[f64]) -> f64 {
    if values.len() <= 1 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Resample each step score's verdict list with replacement (same size) and
/// rebuild the chain score, modeling verifier sampling noise. Perplexity
/// scores carry no verdicts and pass through unchanged.
fn bootstrap_chain_score(
    scored: &ScoredChain,
    kinds: &[VerifierKind],
    weights: &WeightConfig,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<ChainScore, HarnessError> {
    let mut resampled: Vec<StepScore> = Vec::with_capacity(scored.step_scores.len());
    for step_score in &scored.step_scores {
        if step_score.verdicts.is_empty() {
            resampled.push(step_score.clone());
            continue;
        }
        let n = step_score.verdicts.len();
        let verdicts: Vec<Verdict> = (0..n)
            .map(|_| step_score.verdicts[rng.random_range(0..n)].clone())
            .collect();
        let score = expectation_score(&verdicts)?;
        resampled.push(StepScore {
            score,
            verdicts,
            ..step_score.clone()
        });
    }
    Ok(reduce_chain_score(
        &scored.chain.chain_id,
        &resampled,
        kinds,
        weights,
        eps,
        scored.score.n_steps_scored,
    )?)
}

fn kinds_present(pool: &ProblemPool) -> Vec<VerifierKind> {
    let mut kinds: Vec<VerifierKind> = pool
        .chains
        .iter()
        .flat_map(|c| c.score.per_verifier.keys().copied())
        .collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

fn find_answer<'p>(pool: &'p ProblemPool, chain_id: &str) -> Option<&'p str> {
    pool.chains
        .iter()
        .find(|c| c.chain.chain_id == chain_id)
        .and_then(|c| c.answer.as_deref())
}

/// Selection of one trial on one problem: the winning answer plus the
/// chain it came from (absent for votes).
struct TrialPick {
    selected_chain: Option<String>,
    answer: Option<String>,
}

fn pick_single(
    pool: &ProblemPool,
    scores: &[ChainScore],
    mode: SelectionMode,
    seed: u64,
) -> Result<TrialPick, HarnessError> {
    let chains: Vec<ReasoningChain> = pool.chains.iter().map(|c| c.chain.clone()).collect();
    let chain_id = match mode {
        SelectionMode::Random => select_random(&chains, seed)?,
        SelectionMode::LowPpl => select_low_ppl(&chains)?,
        SelectionMode::TopVerifier => select_top(scores)?,
    };
    Ok(TrialPick {
        answer: find_answer(pool, &chain_id).map(str::to_string),
        selected_chain: Some(chain_id),
    })
}

fn pick_vote(
    pool: &ProblemPool,
    scores: &[ChainScore],
    mode: SelectionMode,
    vote: &VoteSpec,
    rng: &mut impl Rng,
) -> Result<TrialPick, HarnessError> {
    let n = pool.chains.len();
    let k = vote.k.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    match mode {
        SelectionMode::Random => {
            // Fisher-Yates prefix shuffle.
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
        }
        SelectionMode::LowPpl => {
            let mut ppls = Vec::with_capacity(n);
            for chain in &pool.chains {
                ppls.push(chain_perplexity(&chain.chain)?);
            }
            order.sort_by(|&a, &b| ppls[a].partial_cmp(&ppls[b]).unwrap().then(a.cmp(&b)));
        }
        SelectionMode::TopVerifier => {
            order.sort_by(|&a, &b| {
                scores[b]
                    .aggregate
                    .partial_cmp(&scores[a].aggregate)
                    .unwrap()
                    .then(a.cmp(&b))
            });
        }
    }
    order.truncate(k);

    let entries: Vec<(String, f64)> = order
        .iter()
        .filter_map(|&i| {
            pool.chains[i]
                .answer
                .clone()
                .map(|answer| (answer, scores[i].aggregate))
        })
        .collect();
    if entries.is_empty() {
        return Ok(TrialPick {
            selected_chain: None,
            answer: None,
        });
    }
    let result = match vote.mode {
        VoteMode::Majority => {
            let answers: Vec<String> = entries.iter().map(|(a, _)| a.clone()).collect();
            majority_vote(&answers)?
        }
        VoteMode::Weighted => weighted_vote(&entries)?,
    };
    Ok(TrialPick {
        selected_chain: None,
        answer: Some(result.winner),
    })
}

/// Run the configured selection mode for `trials` trials over a prepared
/// pool. Random mode re-draws selections per trial; top-verifier mode
/// bootstrap-resamples verifier verdicts per trial; low-perplexity mode is
/// deterministic and reports a std of exactly zero.
pub fn run_trials_on_pool(
    config: &ExperimentConfig,
    pools: &[ProblemPool],
) -> Result<(ModeRow, Vec<ProblemRecord>), HarnessError> {
    run_mode_on_pool(
        config,
        pools,
        config.selection,
        &config.verifiers,
        config.vote,
    )
}

fn run_mode_on_pool(
    config: &ExperimentConfig,
    pools: &[ProblemPool],
    mode: SelectionMode,
    verifiers: &[VerifierKind],
    vote: Option<VoteSpec>,
) -> Result<(ModeRow, Vec<ProblemRecord>), HarnessError> {
    config.validate()?;
    let failures: usize = pools.iter().map(|p| p.failures).sum();
    if pools.is_empty() || pools.iter().all(|p| p.chains.is_empty()) {
        return Err(HarnessError::EmptySet);
    }

    let deterministic = matches!(mode, SelectionMode::LowPpl);
    let effective_trials = if deterministic { 1 } else { config.trials };
    let seed_str = config.seed.to_string();

    let mut trial_accuracies = Vec::with_capacity(config.trials);
    let mut first_trial_records: Vec<ProblemRecord> = Vec::new();
    for t in 1..=effective_trials {
        let t_str = t.to_string();
        let picks: Vec<TrialPick> = pools
            .par_iter()
            .map(|pool| -> Result<TrialPick, HarnessError> {
                if pool.chains.is_empty() {
                    // Every generation failed: the problem stays in the
                    // denominator and scores incorrect, so accuracy stays
                    // comparable across modes.
                    return Ok(TrialPick {
                        selected_chain: None,
                        answer: None,
                    });
                }
                let base_scores: Vec<ChainScore> =
                    pool.chains.iter().map(|c| c.score.clone()).collect();
                let scores: Vec<ChainScore> = if mode == SelectionMode::TopVerifier {
                    let kinds = kinds_present(pool);
                    let mut rng = derive_rng(&[&seed_str, "bootstrap", &t_str, &pool.problem.id]);
                    pool.chains
                        .iter()
                        .map(|c| {
                            bootstrap_chain_score(c, &kinds, &config.weights, config.eps, &mut rng)
                        })
                        .collect::<Result<_, _>>()?
                } else {
                    base_scores
                };
                match vote {
                    Some(spec) => {
                        let mut rng = derive_rng(&[&seed_str, "vote", &t_str, &pool.problem.id]);
                        pick_vote(pool, &scores, mode, &spec, &mut rng)
                    }
                    None => {
                        let seed = derive_u64(&[&seed_str, "random", &t_str, &pool.problem.id]);
                        pick_single(pool, &scores, mode, seed)
                    }
                }
            })
            .collect::<Result<_, _>>()?;

        let predictions: Vec<String> = picks
            .iter()
            .map(|p| p.answer.clone().unwrap_or_default())
            .collect();
        let golds: Vec<String> = pools.iter().map(|p| p.gold.clone()).collect();
        trial_accuracies.push(accuracy(&predictions, &golds)?);

        if t == 1 {
            first_trial_records = pools
                .iter()
                .zip(&picks)
                .map(|(pool, pick)| ProblemRecord {
                    problem_id: pool.problem.id.clone(),
                    selected_chain: pick.selected_chain.clone(),
                    answer: pick.answer.clone(),
                    correct: pick.answer.as_deref() == Some(pool.gold.as_str()),
                })
                .collect();
        }
    }
    if deterministic {
        // Every trial is identical; report the exact zero std convention.
        let value = trial_accuracies[0];
        trial_accuracies = vec![value; config.trials];
    }

    let mode_name = match vote {
        Some(spec) => format!(
            "{}/vote_{}",
            mode.name(),
            match spec.mode {
                VoteMode::Majority => "majority",
                VoteMode::Weighted => "weighted",
            }
        ),
        None => mode.name().to_string(),
    };
    let mean = trial_accuracies.iter().sum::<f64>() / trial_accuracies.len() as f64;
    let std = if deterministic {
        0.0
    } else {
        population_std(&trial_accuracies)
    };
    Ok((
        ModeRow {
            mode: mode_name,
            verifiers: verifiers.to_vec(),
            k: vote.map(|v| v.k),
            accuracy_mean: mean,
            accuracy_std: std,
            n_problems: pools.len(),
            failures,
            trial_accuracies,
        },
        first_trial_records,
    ))
}

/// Rebuild chain scores over a verifier subset without touching the
/// backend; chains keep only step scores of the subset kinds.
pub fn restrict_pool(
    pools: &[ProblemPool],
    kinds: &[VerifierKind],
    weights: &WeightConfig,
    eps: f64,
) -> Result<Vec<ProblemPool>, HarnessError> {
    let mut subset: Vec<VerifierKind> = kinds.to_vec();
    subset.sort();
    subset.dedup();
    pools
        .iter()
        .map(|pool| {
            let chains = pool
                .chains
                .iter()
                .map(|scored| -> Result<ScoredChain, HarnessError> {
                    let step_scores: Vec<StepScore> = scored
                        .step_scores
                        .iter()
                        .filter(|s| subset.contains(&s.kind))
                        .cloned()
                        .collect();
                    let score = reduce_chain_score(
                        &scored.chain.chain_id,
                        &step_scores,
                        &subset,
                        weights,
                        eps,
                        scored.score.n_steps_scored,
                    )?;
                    Ok(ScoredChain {
                        chain: scored.chain.clone(),
                        answer: scored.answer.clone(),
                        step_scores,
                        score,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ProblemPool {
                problem: pool.problem.clone(),
                gold: pool.gold.clone(),
                chains,
                failures: pool.failures,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub subset: Vec<VerifierKind>,
    pub row: ModeRow,
}

/// Run the trial protocol once per verifier subset, re-aggregating cached
/// step scores; the empty subset degenerates to the random baseline.
pub fn ablate(
    config: &ExperimentConfig,
    pools: &[ProblemPool],
    subsets: &[Vec<VerifierKind>],
) -> Result<Vec<AblationRow>, HarnessError> {
    let mut rows = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let (row, _) = if subset.is_empty() {
            run_mode_on_pool(config, pools, SelectionMode::Random, &[], config.vote)?
        } else {
            let restricted = restrict_pool(pools, subset, &config.weights, config.eps)?;
            run_mode_on_pool(
                config,
                &restricted,
                SelectionMode::TopVerifier,
                subset,
                config.vote,
            )?
        };
        rows.push(AblationRow {
            subset: subset.clone(),
            row,
        });
    }
    Ok(rows)
}
