//! Command-line front end: pipeline stages as subcommands talking JSONL
//! files, plus the correlation simulation and the arithmetic checker.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chaincheck::backend::{make_backend, Backend, ResponseCache};
use chaincheck::chain::{
    chain_prefix, read_chains_jsonl, write_chains_jsonl, PrefixSpec, ReasoningChain,
};
use chaincheck::harness::{
    ablate, build_pool, load_problems, pools_from_parts, run_trials_on_pool, ExperimentConfig,
    PoolBuilder, Provenance, Report, SelectionMode, VoteMode, VoteSpec,
};
use chaincheck::mathcheck::{
    check_formula, extract_marked_formulas, parse_inline_formula, Formula, ToleranceSpec,
};
use chaincheck::simcorr::{simulate, write_csv, NoiseModel, SimParams, DEFAULT_CORRELATIONS};
use chaincheck::verifiers::{
    read_scores_jsonl, write_scores_jsonl, PromptCatalog, ScoreRecord, VerifierKind,
};

#[derive(Parser)]
#[command(
    name = "chaincheck",
    version,
    about = "Verifier-guided selection over sampled reasoning chains"
)]
struct Cli {
    /// Experiment config JSON (required by pipeline subcommands).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the content-addressed response cache.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Prompt catalog directory overriding the built-in templates.
    #[arg(long, global = true)]
    prompts: Option<PathBuf>,
    /// Worker threads for problem-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Chatty progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Random,
    LowPpl,
    TopVerifier,
}

impl From<ModeArg> for SelectionMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Random => SelectionMode::Random,
            ModeArg::LowPpl => SelectionMode::LowPpl,
            ModeArg::TopVerifier => SelectionMode::TopVerifier,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VoteArg {
    Majority,
    Weighted,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    ChainNoise,
    StepMixture,
}

#[derive(Subcommand)]
enum Command {
    /// Sample reasoning chains for every problem in the dataset.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Score chains with the configured verifiers.
    Verify {
        #[arg(long)]
        chains: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write aggregated chain scores.
        #[arg(long)]
        chain_scores: Option<PathBuf>,
    },
    /// Pick one chain per problem and report accuracy.
    Select {
        #[arg(long)]
        chains: PathBuf,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ensemble final answers across a pool of chains by voting.
    Vote {
        #[arg(long)]
        chains: PathBuf,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: VoteArg,
        #[arg(short, long)]
        k: usize,
        /// How the voting pool is drawn from the sampled chains.
        #[arg(long, value_enum, default_value = "top-verifier")]
        pool: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truncate chains to a leading prefix ("all", "percent:20", "count:2").
    Prefix {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        chains: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-aggregate existing scores over verifier subsets.
    Ablate {
        #[arg(long)]
        chains: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Semicolon-separated subsets of comma-separated verifier names;
        /// "none" is the empty subset, "all" is every verifier.
        #[arg(long)]
        subsets: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check arithmetic claims, one per line, from a file or stdin.
    Mathcheck {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.005)]
        abs_tol: f64,
        #[arg(long, default_value_t = 1e-4)]
        rel_tol: f64,
    },
    /// Sweep verifier-vs-truth correlation levels.
    Simulate {
        /// Comma-separated correlation levels in [0, 1].
        #[arg(long)]
        correlations: Option<String>,
        #[arg(long, default_value_t = 2000)]
        n_problems: usize,
        #[arg(long, default_value_t = 18)]
        chains: usize,
        #[arg(long, default_value_t = 4)]
        steps: usize,
        #[arg(long, value_enum, default_value = "chain-noise")]
        noise: NoiseArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline (cache-backed) and emit the report.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Also report the random and low-perplexity baselines.
        #[arg(long)]
        all_modes: bool,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(value: E) -> Self {
        CliError::Runtime(value.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

struct Env {
    config: ExperimentConfig,
    backend: Box<dyn Backend>,
    cache: Option<ResponseCache>,
    catalog: PromptCatalog,
}

fn load_env(cli: &Cli) -> Result<Env, CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required for this subcommand".into()))?;
    let raw = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Runtime(format!("reading {}: {e}", config_path.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::Runtime(format!("parsing {}: {e}", config_path.display())))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    let backend = make_backend(&config.backend)?;
    let cache = match &cli.cache_dir {
        Some(dir) => Some(ResponseCache::new(dir)?),
        None => None,
    };
    let catalog = match &cli.prompts {
        Some(dir) => PromptCatalog::load(dir)
            .map_err(|e| CliError::Runtime(format!("loading prompt catalog: {e}")))?,
        None => PromptCatalog::default(),
    };
    Ok(Env {
        config,
        backend,
        cache,
        catalog,
    })
}

impl Env {
    fn builder(&self) -> PoolBuilder<'_> {
        PoolBuilder {
            backend: self.backend.as_ref(),
            cache: self.cache.as_ref(),
            catalog: &self.catalog,
            config: &self.config,
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            backend_id: self.backend.id().to_string(),
            prompt_catalog_hash: self.catalog.hash(),
            cache: self.cache.as_ref().map(|c| c.stats()),
        }
    }
}

fn parse_prefix_spec(raw: &str) -> Result<PrefixSpec, CliError> {
    let spec = match raw.trim() {
        "all" => PrefixSpec::All,
        other => match other.split_once(':') {
            Some(("percent", amount)) => PrefixSpec::Percent(
                amount
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad percent amount {amount:?}")))?,
            ),
            Some(("count", amount)) => PrefixSpec::Count(
                amount
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad count amount {amount:?}")))?,
            ),
            _ => {
                return Err(CliError::Usage(format!(
                    "prefix spec {raw:?} must be \"all\", \"percent:<p>\" or \"count:<n>\""
                )))
            }
        },
    };
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn parse_subsets(raw: &str) -> Result<Vec<Vec<VerifierKind>>, CliError> {
    raw.split(';')
        .map(|group| {
            let group = group.trim();
            if group.is_empty() || group == "none" {
                return Ok(Vec::new());
            }
            if group == "all" {
                return Ok(VerifierKind::ALL.to_vec());
            }
            group
                .split(',')
                .map(|name| name.parse::<VerifierKind>().map_err(CliError::Usage))
                .collect()
        })
        .collect()
}

fn write_records_jsonl<T: serde::Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut file, record)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { out } => {
            let env = load_env(cli)?;
            let problems = load_problems(&env.config.dataset_path)?;
            let builder = env.builder();
            let mut all_chains: Vec<ReasoningChain> = Vec::new();
            let mut failures = 0usize;
            for (i, problem) in problems.iter().enumerate() {
                let (chains, failed) = builder.generate_chains(problem)?;
                failures += failed;
                all_chains.extend(chains);
                if cli.verbose {
                    eprintln!(
                        "generate: problem {}/{} ({})",
                        i + 1,
                        problems.len(),
                        problem.id
                    );
                }
            }
            write_chains_jsonl(out, &all_chains)?;
            println!(
                "generate: {} chains over {} problems -> {} ({} failures)",
                all_chains.len(),
                problems.len(),
                out.display(),
                failures
            );
            Ok(())
        }
        Command::Verify {
            chains,
            out,
            chain_scores,
        } => {
            let env = load_env(cli)?;
            let problems = load_problems(&env.config.dataset_path)?;
            let chains = read_chains_jsonl(chains)?;
            let builder = env.builder();
            let mut records: Vec<ScoreRecord> = Vec::new();
            let mut aggregated = Vec::new();
            let mut scored_chains = 0usize;
            for (i, problem) in problems.iter().enumerate() {
                let owned: Vec<ReasoningChain> = chains
                    .iter()
                    .filter(|c| c.problem_id == problem.id)
                    .cloned()
                    .collect();
                if owned.is_empty() {
                    continue;
                }
                if cli.verbose {
                    eprintln!(
                        "verify: problem {}/{} ({})",
                        i + 1,
                        problems.len(),
                        problem.id
                    );
                }
                let pool = builder.score_chains(problem, owned, 0)?;
                for scored in &pool.chains {
                    scored_chains += 1;
                    for step_score in &scored.step_scores {
                        records.push(ScoreRecord::from_step_score(
                            &scored.chain.chain_id,
                            step_score,
                        ));
                    }
                    aggregated.push(scored.score.clone());
                }
            }
            write_scores_jsonl(out, &records)?;
            if let Some(path) = chain_scores {
                write_records_jsonl(path, &aggregated)?;
            }
            println!(
                "verify: {} chains scored, {} step records -> {}",
                scored_chains,
                records.len(),
                out.display()
            );
            Ok(())
        }
        Command::Select {
            chains,
            scores,
            mode,
            out,
        } => {
            let mut env = load_env(cli)?;
            env.config.selection = (*mode).into();
            env.config.vote = None;
            let (row, records) = run_stage_trials(&env, chains, scores.as_deref())?;
            write_records_jsonl(out, &records)?;
            println!(
                "select: mode={} accuracy {:.2}±{:.2} over {} problems -> {}",
                row.mode,
                row.accuracy_mean,
                row.accuracy_std,
                row.n_problems,
                out.display()
            );
            Ok(())
        }
        Command::Vote {
            chains,
            scores,
            mode,
            k,
            pool,
            out,
        } => {
            let mut env = load_env(cli)?;
            env.config.selection = (*pool).into();
            env.config.vote = Some(VoteSpec {
                mode: match mode {
                    VoteArg::Majority => VoteMode::Majority,
                    VoteArg::Weighted => VoteMode::Weighted,
                },
                k: *k,
            });
            let (row, records) = run_stage_trials(&env, chains, scores.as_deref())?;
            write_records_jsonl(out, &records)?;
            println!(
                "vote: mode={} k={} accuracy {:.2}±{:.2} over {} problems -> {}",
                row.mode,
                k,
                row.accuracy_mean,
                row.accuracy_std,
                row.n_problems,
                out.display()
            );
            Ok(())
        }
        Command::Prefix { spec, chains, out } => {
            let spec = parse_prefix_spec(spec)?;
            let chains = read_chains_jsonl(chains)?;
            let truncated: Vec<ReasoningChain> = chains
                .iter()
                .map(|c| chain_prefix(c, &spec))
                .collect::<Result<_, _>>()?;
            write_chains_jsonl(out, &truncated)?;
            println!(
                "prefix: {} chains truncated -> {}",
                truncated.len(),
                out.display()
            );
            Ok(())
        }
        Command::Ablate {
            chains,
            scores,
            subsets,
            out,
            csv,
        } => {
            let env = load_env(cli)?;
            let problems = load_problems(&env.config.dataset_path)?;
            let chains = read_chains_jsonl(chains)?;
            let records = read_scores_jsonl(scores)?;
            let subsets = parse_subsets(subsets)?;
            let pools = pools_from_parts(&problems, &chains, &records, &env.config)?;
            let rows = ablate(&env.config, &pools, &subsets)?;
            let report = Report {
                config: env.config.clone(),
                provenance: env.provenance(),
                rows: rows.iter().map(|r| r.row.clone()).collect(),
                per_problem: Vec::new(),
            };
            std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv())?;
            }
            println!("ablate: {} subsets -> {}", rows.len(), out.display());
            Ok(())
        }
        Command::Mathcheck {
            input,
            abs_tol,
            rel_tol,
        } => {
            let tol = ToleranceSpec::new(*abs_tol, *rel_tol)?;
            let stdin = std::io::stdin();
            let reader: Box<dyn BufRead> = match input {
                Some(path) => Box::new(std::io::BufReader::new(std::fs::File::open(path)?)),
                None => Box::new(stdin.lock()),
            };
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let verdict = check_line(&line, &tol);
                serde_json::to_writer(&mut out, &verdict)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
        Command::Simulate {
            correlations,
            n_problems,
            chains,
            steps,
            noise,
            out,
        } => {
            let correlations = match correlations {
                Some(raw) => raw
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| CliError::Usage(format!("bad correlation {v:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                None => DEFAULT_CORRELATIONS.to_vec(),
            };
            let params = SimParams {
                n_problems: *n_problems,
                chains_per_problem: *chains,
                steps_per_chain: *steps,
                correctness_threshold: 0.75,
                correlations,
                seed: cli.seed.unwrap_or(7),
                noise: match noise {
                    NoiseArg::ChainNoise => NoiseModel::ChainNoise,
                    NoiseArg::StepMixture => NoiseModel::StepMixture,
                },
            };
            let results = simulate(&params)?;
            write_csv(out, &results)?;
            let baseline = results.first().map(|r| r.baseline).unwrap_or(f64::NAN);
            println!(
                "simulate: {} correlations, baseline {:.3}, scores {} -> {}",
                results.len(),
                baseline,
                results
                    .iter()
                    .map(|r| format!("{:.3}", r.score))
                    .collect::<Vec<_>>()
                    .join("/"),
                out.display()
            );
            Ok(())
        }
        Command::Report {
            out,
            csv,
            all_modes,
        } => {
            let env = load_env(cli)?;
            let problems = load_problems(&env.config.dataset_path)?;
            let builder = env.builder();
            let pools = build_pool(&builder, &problems)?;
            let mut rows = Vec::new();
            let mut per_problem = Vec::new();
            if *all_modes {
                for mode in [
                    SelectionMode::Random,
                    SelectionMode::LowPpl,
                    SelectionMode::TopVerifier,
                ] {
                    let mut config = env.config.clone();
                    config.selection = mode;
                    let (row, records) = run_trials_on_pool(&config, &pools)?;
                    if mode == env.config.selection {
                        per_problem = records;
                    }
                    rows.push(row);
                }
            } else {
                let (row, records) = run_trials_on_pool(&env.config, &pools)?;
                per_problem = records;
                rows.push(row);
            }
            let summary = rows
                .iter()
                .map(|r| format!("{} {:.2}±{:.2}", r.mode, r.accuracy_mean, r.accuracy_std))
                .collect::<Vec<_>>()
                .join(", ");
            let report = Report {
                config: env.config.clone(),
                provenance: env.provenance(),
                rows,
                per_problem,
            };
            std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
            std::fs::write(csv, report.to_csv())?;
            println!("report: {summary} -> {}", out.display());
            Ok(())
        }
    }
}

/// Shared select/vote machinery over stage files.
fn run_stage_trials(
    env: &Env,
    chains_path: &Path,
    scores_path: Option<&Path>,
) -> Result<
    (
        chaincheck::harness::ModeRow,
        Vec<chaincheck::harness::ProblemRecord>,
    ),
    CliError,
> {
    let problems = load_problems(&env.config.dataset_path)?;
    let chains = read_chains_jsonl(chains_path)?;
    let records = match scores_path {
        Some(path) => read_scores_jsonl(path)?,
        None => Vec::new(),
    };
    if env.config.selection == SelectionMode::TopVerifier && records.is_empty() {
        return Err(CliError::Usage(
            "--scores is required for top-verifier selection".into(),
        ));
    }
    let pools = pools_from_parts(&problems, &chains, &records, &env.config)?;
    Ok(run_trials_on_pool(&env.config, &pools)?)
}

#[derive(serde::Serialize)]
struct LineVerdict {
    input: String,
    formulas: Vec<Formula>,
    verdict: bool,
    detail: String,
}

fn check_line(line: &str, tol: &ToleranceSpec) -> LineVerdict {
    let scan = extract_marked_formulas(line);
    let formulas = if scan.formulas.is_empty() {
        parse_inline_formula(line).into_iter().collect()
    } else {
        scan.formulas
    };
    if formulas.is_empty() {
        return LineVerdict {
            input: line.to_string(),
            formulas,
            verdict: true,
            detail: "no formulas found".to_string(),
        };
    }
    let mut verdict = true;
    let mut details = Vec::new();
    for formula in &formulas {
        let check = check_formula(formula, tol);
        verdict &= check.holds;
        let values = match (check.lhs_value, check.rhs_value) {
            (Some(l), Some(r)) => format!("{l} {} {r}", formula.op.symbol()),
            _ => check.error.unwrap_or_else(|| "unevaluable".to_string()),
        };
        details.push(format!(
            "{} {} {}: {} ({})",
            formula.lhs,
            formula.op.symbol(),
            formula.rhs,
            check.holds,
            values
        ));
    }
    LineVerdict {
        input: line.to_string(),
        formulas,
        verdict,
        detail: details.join("; "),
    }
}
