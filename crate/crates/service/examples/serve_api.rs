//! Serves the REST API over the use-case graph on an ephemeral port, calls
//! a few endpoints and shuts down.

use std::sync::Arc;

use deptex::api::{router, AppState};
use deptex::config::ServiceConfig;
use deptex::http::UreqTransport;
use deptex::{Service, Store};
use deptex_core::demo;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = demo::routing();
    let mut store = Store::in_memory();
    store.state.graph = scenario.graph;
    let svc = Service::new(store, ServiceConfig::default(), Arc::new(UreqTransport::new())).with_actor("api");
    let state = AppState::new(svc, Some("demo-token".into()));

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}/api/v1", listener.local_addr()?);
    let server = tokio::spawn(async move { axum::serve(listener, router(state)).await });
    println!("serving on {base}");

    let calls = [
        format!("{base}/signals/{}/blast-radius", scenario.signal),
        format!("{base}/orgs/{}/leaderboard", scenario.org),
        format!(
            "{base}/orgs/{}/leaderboard?override_tier={}:tier-3&format=csv",
            scenario.org, scenario.gateway
        ),
    ];
    for url in calls {
        let body = tokio::task::spawn_blocking(move || -> Result<String, ureq::Error> {
            let mut resp = ureq::get(&url).header("Authorization", "Bearer demo-token").call()?;
            println!("GET {url} -> {}", resp.status());
            resp.body_mut().read_to_string()
        })
        .await??;
        println!("{body}\n");
    }
    server.abort();
    Ok(())
}
