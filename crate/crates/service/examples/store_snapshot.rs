//! Drives the service layer against a snapshot file: mutations are
//! persisted atomically and survive a reopen; a damaged file is refused.

use std::sync::Arc;

use deptex::config::ServiceConfig;
use deptex::service::NewPolicy;
use deptex::{Service, Store, StoreError};
use deptex_core::demo;
use deptex_core::transport::OfflineTransport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("deptex-store.json");
    let scenario = demo::triage();

    let mut store = Store::open(&path)?;
    store.state.graph = scenario.graph.clone();
    let mut svc = Service::new(store, ServiceConfig::default(), Arc::new(OfflineTransport)).with_actor("example");
    for slice in &scenario.slices {
        svc.ingest_slice(&serde_json::to_vec(slice)?)?;
    }
    svc.add_policy(NewPolicy {
        policy_id: "hold-hot".into(),
        source: "#context: status\nif depscore != null and depscore >= 90 { transition(\"unreviewed\"); }\n".into(),
        context: None,
        budget: None,
    })?;
    svc.set_asset_tier(&scenario.public_assets[0], "default")?;
    drop(svc);

    let reopened = Store::open(&path)?;
    println!(
        "{}: {} nodes, {} depscores, {} policies, {} audit records",
        path.display(),
        reopened.state.graph.node_count(),
        reopened.state.depscores.len(),
        reopened.state.policies.len(),
        reopened.state.audit.len()
    );
    for record in reopened.state.audit.iter().rev().take(3) {
        println!(
            "  {} {} {} {}",
            record.timestamp, record.actor, record.action, record.subject
        );
    }

    let bytes = std::fs::read(&path)?;
    std::fs::write(&path, &bytes[..bytes.len() - 10])?;
    match Store::open(&path) {
        Err(StoreError::CorruptSnapshot(why)) => println!("truncated file refused: {why}"),
        other => println!("unexpected: {:?}", other.map(|_| ())),
    }
    Ok(())
}
