//! Verifier-guided selection of step-by-step reasoning chains.
//!
//! Candidate solutions are sampled from a pluggable text-generation
//! backend, every reasoning step is scored against general constraint
//! verifiers (relevance, logical consistency, mathematical accuracy,
//! perplexity), step scores are aggregated into chain-level values, and
//! chains are selected or ensembled to maximize answer accuracy. A Monte
//! Carlo module studies how selection quality varies with the correlation
//! between verifier verdicts and step-level ground truth.

pub mod backend;
pub mod chain;
pub mod harness;
pub mod mathcheck;
pub mod scoring;
pub mod simcorr;
pub mod verifiers;

pub use backend::{Backend, BackendConfig, Completion, CompletionRequest, ResponseCache};
pub use chain::{AnswerType, PrefixSpec, Problem, ReasoningChain, ReasoningStep, TokenLogprob};
pub use scoring::{ChainScore, VoteResult, WeightConfig};
pub use verifiers::{PromptCatalog, StepScore, Verdict, Verifier, VerifierKind};
