//! Runs a PR policy that consults a (mocked) legal review service, first as
//! a plain evaluation and then as a dry run with a step trace.

use deptex_core::demo;
use deptex_core::ingest::dependency_delta;
use deptex_core::policy::{dry_run, evaluate, ContextBinding, PolicyScript, PrMeta, SandboxBudget};
use deptex_core::transport::MockTransport;
use serde_json::json;

const SOURCE: &str = r#"#context: pr
for lic in delta.added_licenses {
    let verdict = http_post("https://legal.example/api/review", {license: lic, repo: pr.repo});
    if verdict.status == "Unapproved" {
        block("Legal rejected " + lic + ": " + verdict.reason);
    }
}
allow("licenses cleared");
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = demo::gate();
    let delta = dependency_delta(&scenario.base, &scenario.head);
    let meta = PrMeta {
        repo: "acme/checkout".into(),
        number: 7,
        author: "dev".into(),
    };
    let binding = ContextBinding::pr(&scenario.graph, &scenario.asset, &delta, meta)?;

    let budget = SandboxBudget::default().with_allowlist(["https://legal.example/api"]);
    let script = PolicyScript::from_source("legal-review", SOURCE)?.with_budget(budget.clone())?;
    let legal = MockTransport::new().json(
        "https://legal.example/api",
        json!({"status": "Unapproved", "reason": "network copyleft"}),
    );

    let outcome = evaluate(&script, &binding, &budget, &legal)?;
    println!("outcome: {}", serde_json::to_string(&outcome)?);

    let report = dry_run(&script, &binding, &budget, &legal);
    println!(
        "{} trace steps, {} http calls",
        report.trace.len(),
        report.http_log.len()
    );
    for step in report.trace.iter().take(8) {
        println!("  {}", serde_json::to_string(step)?);
    }

    let denied = PolicyScript::from_source("legal-review", SOURCE)?;
    match evaluate(&denied, &binding, &SandboxBudget::default(), &legal) {
        Err(e) => println!("without an allowlist: {e}"),
        Ok(o) => println!("unexpected: {o:?}"),
    }
    Ok(())
}
