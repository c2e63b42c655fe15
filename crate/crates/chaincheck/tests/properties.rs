//! Property tests for the library invariants.

mod common;

use std::collections::BTreeMap;

use common::reference;
use proptest::prelude::*;

use chaincheck::backend::{cache_key, CompletionRequest};
use chaincheck::chain::{chain_prefix, split_steps, PrefixSpec, ReasoningChain};
use chaincheck::mathcheck::{
    check_formula, eval_expr, CompareOp, Formula, FormulaOrigin, MathError, ToleranceSpec,
};
use chaincheck::scoring::{
    aggregate_score, chain_verifier_score, majority_vote, select_top, weighted_vote, ChainScore,
    WeightConfig,
};
use chaincheck::verifiers::{
    expectation_score, parse_verdict, step_perplexity, Verdict, VerifierKind,
};

fn number_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..500).prop_map(|n| n.to_string()),
        (0u32..100, 0u32..100).prop_map(|(a, b)| format!("{a}.{b:02}")),
        (1u32..900).prop_map(|n| format!("${n}")),
        (1u32..20, 0u32..1000).prop_map(|(a, b)| format!("{a},{b:03}")),
        (1u32..200).prop_map(|n| format!("{n}%")),
    ]
}

fn expr_strategy() -> impl Strategy<Value = String> {
    number_strategy().prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}+{b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}-{b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} / {b}")),
            inner.clone().prop_map(|a| format!("({a})")),
            inner.clone().prop_map(|a| format!("-{a}")),
            (inner, 0u32..4).prop_map(|(a, e)| format!("({a})^{e}")),
        ]
    })
}

proptest! {
    #[test]
    fn eval_agrees_with_reference(expr in expr_strategy()) {
        match (eval_expr(&expr), reference::eval(&expr)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b, "on {}", expr),
            (Err(MathError::DivisionByZero), Err(reference::RefError::DivByZero)) => {}
            (Err(MathError::Overflow), Err(reference::RefError::Overflow)) => {}
            (Err(MathError::Parse(_)), Err(reference::RefError::Parse)) => {}
            (ours, theirs) => prop_assert!(false, "divergence on {}: {:?} vs {:?}", expr, ours, theirs),
        }
    }

    #[test]
    fn formula_mirror_symmetry(
        lhs in -10_000i64..10_000,
        rhs in -10_000i64..10_000,
        op_idx in 0usize..6,
    ) {
        let ops = [CompareOp::Eq, CompareOp::Ne, CompareOp::Lt, CompareOp::Gt, CompareOp::Le, CompareOp::Ge];
        let op = ops[op_idx];
        let tol = ToleranceSpec::default();
        let forward = Formula {
            lhs: lhs.to_string(),
            op,
            rhs: rhs.to_string(),
            origin: FormulaOrigin::Marker,
        };
        let mirrored = Formula {
            lhs: rhs.to_string(),
            op: op.mirror(),
            rhs: lhs.to_string(),
            origin: FormulaOrigin::Marker,
        };
        prop_assert_eq!(check_formula(&forward, &tol).holds, check_formula(&mirrored, &tol).holds);
    }

    #[test]
    fn normalization_invariance(value in 1_000u64..999_999_999, dollar in any::<bool>()) {
        let plain = value.to_string();
        let mut grouped = String::new();
        for (i, ch) in plain.chars().rev().enumerate() {
            if i > 0 && i % 3 == 0 {
                grouped.push(',');
            }
            grouped.push(ch);
        }
        let mut grouped: String = grouped.chars().rev().collect();
        if dollar {
            grouped.insert(0, '$');
        }
        prop_assert_eq!(eval_expr(&plain).unwrap(), eval_expr(&grouped).unwrap());
    }

    #[test]
    fn tolerance_monotonicity(
        lhs in -1_000i64..1_000,
        delta in 0u64..100,
        tol_a in 0u64..50,
        tol_b in 0u64..50,
    ) {
        let (small, large) = (tol_a.min(tol_b), tol_a.max(tol_b));
        let tight = ToleranceSpec::new(0.001 + small as f64 * 0.01, 1e-9).unwrap();
        let loose = ToleranceSpec::new(0.001 + large as f64 * 0.01, 1e-9).unwrap();
        let formula = Formula {
            lhs: lhs.to_string(),
            op: CompareOp::Eq,
            rhs: format!("{}", lhs as f64 + delta as f64 * 0.005),
            origin: FormulaOrigin::Marker,
        };
        if check_formula(&formula, &tight).holds {
            prop_assert!(check_formula(&formula, &loose).holds);
        }
    }

    #[test]
    fn split_steps_idempotent(lines in prop::collection::vec("[ a-zA-Z0-9.,:()+*/-]{0,30}", 1..12)) {
        let text = lines.join("\n");
        match split_steps(&text) {
            Ok(steps) => {
                let joined: String = steps.iter().map(|s| s.text.clone()).collect::<Vec<_>>().join("\n");
                let again = split_steps(&joined).unwrap();
                prop_assert_eq!(steps, again);
            }
            Err(_) => {
                // Only whitespace-only inputs may fail.
                prop_assert!(text.trim().is_empty());
            }
        }
    }

    #[test]
    fn prefix_monotone_in_amount(
        n_steps in 1usize..12,
        p1 in 1u32..=100,
        p2 in 1u32..=100,
        c1 in 0usize..15,
        c2 in 0usize..15,
    ) {
        let raw: Vec<String> = (0..n_steps).map(|i| format!("step {i}")).collect();
        let chain = ReasoningChain::new("c", "p", raw.join("\n")).unwrap();
        let (lo, hi) = (p1.min(p2), p1.max(p2));
        let a = chain_prefix(&chain, &PrefixSpec::Percent(lo as f64)).unwrap();
        let b = chain_prefix(&chain, &PrefixSpec::Percent(hi as f64)).unwrap();
        prop_assert!(a.steps.len() <= b.steps.len());
        let (lo, hi) = (c1.min(c2), c1.max(c2));
        let a = chain_prefix(&chain, &PrefixSpec::Count(lo)).unwrap();
        let b = chain_prefix(&chain, &PrefixSpec::Count(hi)).unwrap();
        prop_assert!(a.steps.len() <= b.steps.len());
        // Identity at the top of both scales.
        prop_assert_eq!(chain_prefix(&chain, &PrefixSpec::All).unwrap(), chain.clone());
        prop_assert_eq!(chain_prefix(&chain, &PrefixSpec::Percent(100.0)).unwrap(), chain);
    }

    #[test]
    fn gm_between_floored_min_and_max(scores in prop::collection::vec(0.0f64..=1.0, 1..10)) {
        let eps = 1e-4;
        let gm = chain_verifier_score(&scores, eps).unwrap();
        let floored: Vec<f64> = scores.iter().map(|s| s.max(eps)).collect();
        let min = floored.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = floored.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(gm >= min - 1e-12 && gm <= max + 1e-12, "gm {} outside [{}, {}]", gm, min, max);
    }

    #[test]
    fn gm_appending_perfect_step_never_decreases(scores in prop::collection::vec(0.0f64..=1.0, 1..8)) {
        let eps = 1e-4;
        let base = chain_verifier_score(&scores, eps).unwrap();
        let mut extended = scores.clone();
        extended.push(1.0);
        let with_one = chain_verifier_score(&extended, eps).unwrap();
        prop_assert!(with_one + 1e-12 >= base);
        *extended.last_mut().unwrap() = 0.0;
        let with_zero = chain_verifier_score(&extended, eps).unwrap();
        prop_assert!(with_zero < base + 1e-12);
    }

    #[test]
    fn aggregate_monotone_per_entry(
        scores in prop::collection::vec(0.0f64..=1.0, 4),
        bump in 0.0f64..0.5,
        which in 0usize..4,
    ) {
        let kinds = VerifierKind::ALL;
        let per: BTreeMap<VerifierKind, f64> =
            kinds.iter().zip(&scores).map(|(k, s)| (*k, *s)).collect();
        let mut bumped = per.clone();
        let key = kinds[which];
        bumped.insert(key, (per[&key] + bump).min(1.0));
        let weights = WeightConfig::default();
        prop_assert!(
            aggregate_score(&bumped, &weights).unwrap() + 1e-12
                >= aggregate_score(&per, &weights).unwrap()
        );
    }

    #[test]
    fn select_top_invariant_under_order_preserving_transform(
        aggregates in prop::collection::vec(0.0f64..=1.0, 1..20),
    ) {
        let scores: Vec<ChainScore> = aggregates
            .iter()
            .enumerate()
            .map(|(i, a)| ChainScore {
                chain_id: format!("c{i}"),
                per_verifier: BTreeMap::from([(VerifierKind::Perplexity, *a)]),
                aggregate: *a,
                weights_used: BTreeMap::new(),
                n_steps_scored: 1,
            })
            .collect();
        let transformed: Vec<ChainScore> = scores
            .iter()
            .map(|s| ChainScore {
                // sqrt is strictly increasing on [0, 1] and preserves ties.
                aggregate: s.aggregate.sqrt(),
                per_verifier: s
                    .per_verifier
                    .iter()
                    .map(|(k, v)| (*k, v.sqrt()))
                    .collect(),
                ..s.clone()
            })
            .collect();
        prop_assert_eq!(select_top(&scores).unwrap(), select_top(&transformed).unwrap());
    }

    #[test]
    fn expectation_is_fraction_of_ones(bits in prop::collection::vec(any::<bool>(), 1..40)) {
        let verdicts: Vec<Verdict> = bits
            .iter()
            .map(|b| parse_verdict(
                VerifierKind::Relevance,
                if *b { "yes, the solution is relevant" } else { "no, not relevant" },
            ))
            .collect();
        let score = expectation_score(&verdicts).unwrap();
        let ones = bits.iter().filter(|b| **b).count();
        prop_assert_eq!(score, ones as f64 / bits.len() as f64);
        prop_assert!((0.0..=1.0).contains(&score));
    }

    #[test]
    fn step_perplexity_at_least_one(logprobs in prop::collection::vec(-8.0f64..=0.0, 1..30)) {
        let ppl = step_perplexity(&logprobs).unwrap();
        prop_assert!(ppl >= 1.0 - 1e-12, "ppl {}", ppl);
        // Reciprocal equals the exponential of the mean logprob.
        let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
        prop_assert!((1.0 / ppl - mean.exp()).abs() < 1e-12);
    }

    #[test]
    fn uniform_weighted_vote_matches_majority(
        picks in prop::collection::vec(0u8..4, 1..25),
    ) {
        let answers: Vec<String> = picks.iter().map(|p| format!("a{p}")).collect();
        let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
        for answer in &answers {
            *counts.entry(answer).or_insert(0) += 1;
        }
        let top = counts.values().max().copied().unwrap();
        prop_assume!(counts.values().filter(|&&c| c == top).count() == 1);
        let uniform: Vec<(String, f64)> = answers.iter().map(|a| (a.clone(), 1.0)).collect();
        prop_assert_eq!(
            weighted_vote(&uniform).unwrap().winner,
            majority_vote(&answers).unwrap().winner
        );
    }

    #[test]
    fn cache_key_pure_and_prompt_sensitive(prompt in "[a-zA-Z0-9 ]{1,60}", tag in "[a-z0-9]{1,8}") {
        let request = CompletionRequest::new(prompt.clone(), tag.clone());
        prop_assert_eq!(cache_key(&request, "b"), cache_key(&request.clone(), "b"));
        let mut other = request.clone();
        other.prompt.push('!');
        prop_assert_ne!(cache_key(&request, "b"), cache_key(&other, "b"));
    }
}
