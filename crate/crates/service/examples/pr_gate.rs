//! Evaluates the PR gate for a pull request that adds an AGPL library,
//! with the legal review service mocked.

use deptex::gate::{gate_pr, GateRequest};
use deptex_core::demo;
use deptex_core::policy::{PolicyScript, PrMeta, SandboxBudget};
use deptex_core::transport::MockTransport;
use serde_json::json;

const LEGAL: &str = r#"#context: pr
for lic in delta.added_licenses {
    let verdict = http_post("https://legal.example/api/review", {license: lic, repo: pr.repo});
    if verdict.status == "Unapproved" {
        block("Legal rejected " + lic + ": " + verdict.reason);
    }
}
allow("licenses cleared");
"#;

const NO_DOWNGRADES: &str = r#"#context: pr
for u in delta.upgraded {
    log("upgrade " + u.name + " " + u.from + " -> " + u.to);
}
allow;
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = demo::gate();
    let budget = SandboxBudget::default().with_allowlist(["https://legal.example/api"]);
    let policies = [
        PolicyScript::from_source("legal-review", LEGAL)?.with_budget(budget)?,
        PolicyScript::from_source("upgrade-log", NO_DOWNGRADES)?,
    ];
    let req = GateRequest {
        asset_ref: scenario.asset.clone(),
        base_sbom: scenario.base.clone(),
        head_sbom: scenario.head.clone(),
        pr_meta: PrMeta {
            repo: "acme/checkout".into(),
            number: 42,
            author: "dev".into(),
        },
    };

    for verdict in [
        json!({"status": "Unapproved", "reason": "network copyleft"}),
        json!({"status": "Approved"}),
    ] {
        let legal = MockTransport::new().json("https://legal.example/api", verdict.clone());
        let result = gate_pr(&scenario.graph, policies.iter(), &req, &legal)?;
        println!("legal says {verdict}");
        println!("  decision: {:?}", result.decision);
        for line in result.comment.lines() {
            println!("  | {line}");
        }
    }
    Ok(())
}
