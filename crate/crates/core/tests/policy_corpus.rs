//! Golden PolicyLang corpus, AST snapshot, evaluate/dry_run differential
//! and budget accounting.

use std::fs;

use deptex_core::policy::{
    dry_run, evaluate, parse_policy, BudgetKind, PolicyContext, PolicyError, PolicyOutcome, PolicyScript, SandboxBudget,
};
use deptex_core::transport::MockTransport;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "support/conformance.rs"]
mod conformance;

use conformance::{binding, core_dir, run_corpus, run_differential};

#[test]
fn golden_corpus() {
    let summary = run_corpus();
    assert!(summary.scripts >= 30, "corpus has only {} scripts", summary.scripts);
    assert_eq!(summary.contexts.len(), 4);
    for kind in ["budget_exceeded", "http_denied"] {
        assert!(summary.error_kinds.contains(kind), "no {kind} case");
    }
    assert!(summary.failures.is_empty(), "{}", summary.failures.join("\n"));
}

#[test]
fn fifty_statement_ast_snapshot() {
    let source = fs::read_to_string(core_dir().join("tests/ast/fifty.dpx")).unwrap();
    let program = parse_policy(&source).unwrap();
    assert_eq!(program.stmts.len(), 50);
    let rendered = serde_json::to_string_pretty(&program).unwrap() + "\n";
    assert_eq!(
        serde_json::to_string_pretty(&parse_policy(&source).unwrap()).unwrap() + "\n",
        rendered
    );

    let snapshot = core_dir().join("tests/ast/fifty.ast.json");
    if std::env::var_os("DEPTEX_BLESS").is_some() {
        fs::write(&snapshot, &rendered).unwrap();
    }
    let stored = fs::read_to_string(&snapshot).expect("snapshot missing; run with DEPTEX_BLESS=1 once");
    assert_eq!(stored, rendered, "AST snapshot changed");

    // the snapshot script is itself a valid, terminating pr policy
    let script = PolicyScript::new("fifty", PolicyContext::Pr, source).unwrap();
    let out = evaluate(
        &script,
        &binding("pr-agpl"),
        &SandboxBudget::default(),
        &MockTransport::new(),
    );
    assert!(matches!(out, Ok(PolicyOutcome::Pr { .. })), "{out:?}");
}

#[test]
fn dry_run_agrees_with_evaluate_on_200_generated_scripts() {
    let summary = run_differential(200);
    assert_eq!(summary.scripts, 200);
    assert!(summary.divergences.is_empty(), "{}", summary.divergences.join("\n\n"));
    // the generator must exercise both successful and failing evaluations
    assert!(
        summary.successes > 20 && summary.successes < 200,
        "{} successes",
        summary.successes
    );
}

/// Nested loops over literal lists plus plain statements; returns the source
/// and the exact number of interpreter steps it takes.
fn loop_script(rng: &mut ChaCha8Rng, depth: usize) -> (String, u64) {
    let mut src = String::new();
    let mut steps = 0;
    for _ in 0..rng.gen_range(1..4) {
        if depth < 3 && rng.gen_bool(0.5) {
            let n = rng.gen_range(0..6);
            let items: Vec<String> = (0..n).map(|i| i.to_string()).collect();
            let (body, inner) = loop_script(rng, depth + 1);
            src.push_str(&format!("for x{depth} in [{}] {{\n{body}}}\n", items.join(", ")));
            steps += 1 + n as u64 * (1 + inner);
        } else {
            src.push_str(&format!("let t{depth} = {};\n", rng.gen_range(0..9)));
            steps += 1;
        }
    }
    (src, steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_budget_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (body, steps) = loop_script(&mut rng, 0);
        let script = PolicyScript::new("loops", PolicyContext::Policy, body.as_str()).unwrap();
        let b = binding("policy-mit-maintained");
        let t = MockTransport::new();
        let enough = SandboxBudget { max_steps: steps, ..SandboxBudget::default() };
        prop_assert!(evaluate(&script, &b, &enough, &t).is_ok(), "{} steps were not enough:\n{}", steps, body);
        if steps > 1 {
            let short = SandboxBudget { max_steps: steps - 1, ..SandboxBudget::default() };
            prop_assert_eq!(
                evaluate(&script, &b, &short, &t),
                Err(PolicyError::BudgetExceeded { budget: BudgetKind::Steps })
            );
            let report = dry_run(&script, &b, &short, &t);
            prop_assert!(report.trace.iter().all(|e| e.step < steps));
        }
    }
}

#[test]
fn ten_statements_under_three_steps() {
    let src: String = (0..10).map(|i| format!("let v{i} = {i};\n")).collect::<String>() + "allow;";
    let script = PolicyScript::new("ten", PolicyContext::Pr, src).unwrap();
    let budget = SandboxBudget {
        max_steps: 3,
        ..SandboxBudget::default()
    };
    let report = dry_run(&script, &binding("pr-agpl"), &budget, &MockTransport::new());
    assert_eq!(
        report.error,
        Some(PolicyError::BudgetExceeded {
            budget: BudgetKind::Steps
        })
    );
    assert_eq!(report.trace.len(), 3);
}
