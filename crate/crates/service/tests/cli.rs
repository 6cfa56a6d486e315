mod support;

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use deptex::config::ServiceConfig;
use deptex::http::UreqTransport;
use deptex::service::NewPolicy;
use deptex::{Service, Store};
use deptex_core::demo::{self, TRIAGE_PURL, TRIAGE_SEVERITY};
use deptex_core::graph::{CompNode, EdgeKind, Node, NodeKind, Scope};
use deptex_core::ingest::{SbomComponent, SbomDocument};
use serde_json::{json, Value};
use support::{Api, Client};

fn deptex(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deptex"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("DEPTEX_TOKEN")
        .env_remove("DEPTEX_ALPHA")
        .env_remove("DEPTEX_VERIFIER_URL")
        .output()
        .expect("run deptex")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn networked(store: Store) -> Service {
    Service::new(store, ServiceConfig::default(), Arc::new(UreqTransport::new())).with_actor("api")
}

/// Rebuilds the triage scenario through REST calls alone: topology, one
/// SBOM per asset, an OSV feed and the reachability slices.
fn build_triage_over_http(api: &Api, client: &Client) {
    let scenario = demo::triage();
    let g = &scenario.graph;
    let post = |path: &str, body: Value| {
        let (status, resp) = client.post(&api.url(path), &body);
        assert_eq!(status, 200, "POST {path}: {resp}");
        resp
    };
    post("/orgs", json!({"id": scenario.org, "name": "Acme Corp"}));
    for e in g.edges().filter(|e| e.kind == EdgeKind::Contains) {
        let Some(Node::Unit(u)) = g.node(&e.dst) else { panic!() };
        post("/units", json!({"id": u.id, "name": u.name, "org_id": e.src}));
    }
    for e in g.edges().filter(|e| e.kind == EdgeKind::Owns) {
        let Some(Node::Asset(a)) = g.node(&e.dst) else { panic!() };
        post("/assets", json!({"id": a.id, "name": a.name, "unit_id": e.src}));
    }
    let comp = CompNode::from_purl(TRIAGE_PURL);
    for a in scenario.public_assets.iter().chain(&scenario.batch_assets) {
        let sbom = SbomDocument {
            asset_ref: a.to_string(),
            components: vec![SbomComponent {
                purl: TRIAGE_PURL.into(),
                name: comp.name.clone(),
                version: comp.version.clone(),
                licenses: vec!["Apache-2.0".into()],
                direct: true,
                scope: Scope::Runtime,
                depth: 1,
            }],
        };
        post(&format!("/assets/{a}/sbom"), sbom.to_cyclonedx());
    }
    let feed = post(
        "/signals/feed",
        json!({"vulns": [{
            "id": "DEMO-2024-0001",
            "severity": [{"type": "CVSS_V3", "score": TRIAGE_SEVERITY.to_string()}],
            "affected": [{
                "package": {"ecosystem": "Maven", "name": "org.example/fastparse", "purl": "pkg:maven/org.example/fastparse"},
                "ranges": [{"type": "SEMVER", "events": [{"introduced": "0"}, {"fixed": "2.5.0"}]}]
            }]
        }]}),
    );
    assert_eq!(feed["matched"].as_array().unwrap().len(), 1, "{feed}");
    for slice in &scenario.slices {
        let mut body = serde_json::to_value(slice).unwrap();
        body["signal_ref"] = json!("DEMO-2024-0001");
        let result = post("/slices", body);
        let want = if scenario.public_assets.contains(&slice.asset_ref) {
            98
        } else {
            4
        };
        assert_eq!(result["depscore"], want, "{}: {result}", slice.asset_ref);
    }
}

#[test]
fn score_output_matches_the_api_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let api = Api::start(networked(Store::open(&store).unwrap()), None);
    let client = Client::new(None);
    build_triage_over_http(&api, &client);

    let cases = [
        ("", vec![]),
        ("?format=csv", vec!["--format", "csv"]),
        ("?agg=max", vec!["--agg", "max"]),
        (
            "?override_tier=asset-web-api:default,asset-etl-1:default&agg=mean",
            vec![
                "--override-tier",
                "asset-web-api:default,asset-etl-1:default",
                "--agg",
                "mean",
            ],
        ),
    ];
    for (query, flags) in cases {
        let (status, from_api) = client.get(&api.url(&format!("/orgs/org-acme/leaderboard{query}")));
        assert_eq!(status, 200, "{from_api}");
        let mut args = vec!["score", "--org", "org-acme"];
        args.extend(flags);
        let out = deptex(&store, &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(String::from_utf8(out.stdout).unwrap(), from_api, "query `{query}`");
    }

    let rows: Value = serde_json::from_str(&client.get(&api.url("/orgs/org-acme/leaderboard")).1).unwrap();
    assert_eq!(rows[0]["asset_count"], 10);
    assert_eq!(rows[0]["unit_count"], 3);

    let out = deptex(&store, &["score", "--org", "org-missing"]);
    assert_eq!(out.status.code(), Some(2));
}

fn gate_store(dir: &Path, policy: Option<&str>) -> std::path::PathBuf {
    let scenario = demo::gate();
    let path = dir.join("gate-store.json");
    let mut store = Store::open(&path).unwrap();
    store.state.graph = scenario.graph;
    let mut svc = Service::new(store, ServiceConfig::default(), Arc::new(UreqTransport::new()));
    if let Some(source) = policy {
        svc.add_policy(NewPolicy {
            policy_id: "no-agpl".into(),
            source: source.into(),
            context: None,
            budget: None,
        })
        .unwrap();
    }
    svc.into_store().persist().unwrap();
    std::fs::write(dir.join("base.json"), scenario.base.to_json_string()).unwrap();
    std::fs::write(dir.join("head.json"), scenario.head.to_json_string()).unwrap();
    path
}

#[test]
fn gate_exit_code_follows_the_decision() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.json");
    let head = dir.path().join("head.json");
    let args = |store: &Path| -> Output {
        deptex(
            store,
            &[
                "gate",
                "--asset",
                "asset-checkout",
                "--base",
                base.to_str().unwrap(),
                "--head",
                head.to_str().unwrap(),
            ],
        )
    };

    let store = gate_store(dir.path(), None);
    let out = args(&store);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["decision"], "allow");
    std::fs::remove_file(&store).unwrap();

    let source =
        "#context: pr\nif \"AGPL-3.0-only\" in delta.added_licenses { block(\"AGPL needs review\"); }\nallow;\n";
    let store = gate_store(dir.path(), Some(source));
    let out = args(&store);
    assert_eq!(out.status.code(), Some(1));
    let result = stdout_json(&out);
    assert_eq!(result["decision"], "block");
    assert_eq!(result["comment"], "no-agpl: AGPL needs review");

    let reloaded = Store::open(&store).unwrap();
    assert_eq!(reloaded.state.audit.last().unwrap().action, "gate_pr");
    assert_eq!(reloaded.state.audit.last().unwrap().actor, "cli");

    let out = deptex(
        &store,
        &[
            "gate",
            "--asset",
            "asset-nope",
            "--base",
            base.to_str().unwrap(),
            "--head",
            head.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn policy_test_reports_outcome_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("unused.json");
    let binding = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bindings/pr-agpl.json");
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/corpus");

    let script = format!("{corpus}/pr-gpl-exact-membership.dpx");
    let out = deptex(
        &store,
        &["policy", "test", "--context", "pr", "--binding", binding, &script],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["outcome"]["decision"], "allow");
    assert!(!store.exists(), "policy test must not create a store");

    let script = format!("{corpus}/pr-syntax-error.dpx");
    let out = deptex(
        &store,
        &["policy", "test", "--context", "pr", "--binding", binding, &script],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2:9"));

    let script = format!("{corpus}/pr-http-not-allowlisted.dpx");
    let out = deptex(
        &store,
        &["policy", "test", "--context", "pr", "--binding", binding, &script],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["error"]["kind"], "http_denied");
}

fn attrs(v: Value) -> deptex_core::graph::Attrs {
    serde_json::from_value(v).unwrap()
}

#[test]
fn ingest_commands_update_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
    let mut s = Store::open(&store).unwrap();
    let mut svc = Service::new(s, ServiceConfig::default(), Arc::new(UreqTransport::new()));
    svc.create_node(NodeKind::Org, attrs(json!({"id": "org-acme", "name": "Acme"})), None)
        .unwrap();
    svc.create_node(
        NodeKind::Unit,
        attrs(json!({"id": "unit-pay", "name": "Payments"})),
        Some("org-acme".into()),
    )
    .unwrap();
    svc.create_node(
        NodeKind::Asset,
        attrs(json!({"id": "asset-checkout", "name": "checkout"})),
        Some("unit-pay".into()),
    )
    .unwrap();
    s = svc.into_store();
    assert!(store.exists());
    drop(s);

    let out = deptex(
        &store,
        &[
            "ingest",
            "sbom",
            "--asset",
            "asset-checkout",
            &format!("{fixtures}/sbom/checkout-base.json"),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["added"].as_u64().unwrap() > 0);

    let out = deptex(
        &store,
        &["ingest", "vulns", &format!("{fixtures}/feeds/osv-sample.json")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert!(!report["feed"]["matched"].as_array().unwrap().is_empty(), "{report}");

    let out = deptex(
        &store,
        &["ingest", "slice", &format!("{fixtures}/slices/checkout-lodash.json")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["depscore"].as_u64().is_some());

    let out = deptex(
        &store,
        &[
            "ingest",
            "sbom",
            "--asset",
            "asset-checkout",
            &format!("{fixtures}/sbom/invalid-direct-depth.json"),
        ],
    );
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&store, b"{\"format\": 1, \"graph\": ").unwrap();
    let out = deptex(&store, &["score", "--org", "org-acme"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));
}
