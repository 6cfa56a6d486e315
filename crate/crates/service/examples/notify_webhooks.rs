//! Routes a zero-day to on-call or backlog channels by asset tier and
//! delivers signed webhooks, with one endpoint failing to show retries.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use deptex::channel::ChannelDef;
use deptex::dispatch::{dispatch_with, RetryPolicy, SIGNATURE_HEADER};
use deptex_core::demo;
use deptex_core::policy::{evaluate, ContextBinding, PolicyOutcome, PolicyScript};
use deptex_core::reachability::DepscoreIndex;
use deptex_core::transport::{HttpResponse, MockTransport, TransportError};

const ROUTING: &str = r#"#context: notification
for a in assets {
    if a.tier.tier_id == "tier-1" {
        dispatch("pagerduty-oncall", a);
    } else {
        dispatch("jira-backlog", a, "vulnerability.backlog");
    }
}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = demo::routing();
    let binding = ContextBinding::notification(&scenario.graph, &scenario.signal, &DepscoreIndex::new())?;
    let script = PolicyScript::from_source("tier-routing", ROUTING)?;
    let PolicyOutcome::Notification { dispatches } =
        evaluate(&script, &binding, &script.budget, &MockTransport::new())?
    else {
        unreachable!("notification scripts yield notification outcomes")
    };

    let channels: BTreeMap<String, ChannelDef> = [
        ChannelDef::webhook("pagerduty-oncall", "https://pager.example/hook").with_secret("pager-secret"),
        ChannelDef::webhook("jira-backlog", "https://tickets.example/hook"),
    ]
    .into_iter()
    .map(|c| (c.channel_id.clone(), c))
    .collect();

    // the ticket system answers 503 twice before accepting
    let failures = Mutex::new(2);
    let transport = MockTransport::new()
        .route(None, "https://pager.example", |req| {
            println!(
                "pager <- {} ({})",
                req.body.as_deref().unwrap_or(""),
                req.header(SIGNATURE_HEADER).unwrap_or("unsigned")
            );
            Ok(HttpResponse::ok_json(serde_json::json!({})))
        })
        .route(None, "https://tickets.example", move |_| {
            let mut left = failures.lock().map_err(|_| TransportError("poisoned".into()))?;
            if *left > 0 {
                *left -= 1;
                return Ok(HttpResponse {
                    status: 503,
                    body: String::new(),
                });
            }
            Ok(HttpResponse::ok_json(serde_json::json!({"key": "SEC-1"})))
        });

    let sleeps = Mutex::new(Vec::new());
    let report = dispatch_with(
        &dispatches,
        &channels,
        &transport,
        &RetryPolicy::default(),
        &|d: Duration| sleeps.lock().expect("sleep log").push(d),
    )?;
    for d in &report.deliveries {
        println!(
            "{} -> {}: {:?} after {} attempt(s)",
            d.asset.as_deref().unwrap_or("?"),
            d.channel_id,
            d.status,
            d.attempts
        );
    }
    println!("back-off waits: {:?}", sleeps.into_inner()?);
    Ok(())
}
