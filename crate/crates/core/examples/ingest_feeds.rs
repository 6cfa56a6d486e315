//! Mirrors an SBOM onto an asset, matches an OSV feed against the stored
//! components and diffs two SBOMs the way the PR gate does.

use std::path::PathBuf;

use deptex_core::demo;
use deptex_core::ingest::{apply_sbom, dependency_delta, match_vulnerabilities, parse_sbom, parse_vuln_feed};

fn fixture(rel: &str) -> Result<Vec<u8>, std::io::Error> {
    std::fs::read(
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(rel),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = demo::gate();
    let mut graph = scenario.graph;

    // the scenario already holds the base SBOM; apply the PR head on top
    let sbom = parse_sbom(&fixture("sbom/checkout-head.json")?)?;
    let report = apply_sbom(&mut graph, &sbom, &scenario.asset)?;
    println!("sbom: +{} -{} dependency edges", report.added, report.removed);

    let feed = parse_vuln_feed(&fixture("feeds/osv-sample.json")?)?;
    for m in match_vulnerabilities(&mut graph, &feed)? {
        println!(
            "{} (severity {:.1}) affects {}; assets still exposed: {}",
            m.signal.external_id,
            m.signal.severity,
            m.components
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(", "),
            graph.affected_assets(&m.signal.id)?.len()
        );
    }

    let base = parse_sbom(&fixture("sbom/checkout-base.json")?)?;
    let head = parse_sbom(&fixture("sbom/checkout-head.json")?)?;
    let delta = dependency_delta(&base, &head);
    println!("pr delta:");
    for c in &delta.added {
        println!("  added    {} {:?}", c.purl, c.licenses);
    }
    for c in &delta.removed {
        println!("  removed  {}", c.purl);
    }
    for u in &delta.upgraded {
        println!("  upgraded {} {} -> {}", u.package, u.from, u.to);
    }
    println!("new licenses: {:?}", delta.added_licenses());
    Ok(())
}
