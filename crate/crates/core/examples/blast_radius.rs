//! Builds a small organization graph by hand and asks which assets and
//! units a vulnerability reaches.

use deptex_core::graph::{
    AssetNode, CompNode, Edge, EdgeKind, NodeId, OrgGraph, OrgNode, Scope, SignalNode, TierDef, UnitNode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut g = OrgGraph::new();
    g.add_tier(TierDef::new("tier-1", "Revenue critical", 3.0))?;

    let org = g.add_node(OrgNode::new("org-acme", "Acme Corp").into())?;
    let payments = g.add_node(UnitNode::new("unit-payments", "Payments").into())?;
    g.add_edge(Edge::new(org.clone(), payments.clone(), EdgeKind::Contains))?;

    let checkout = g.add_node(AssetNode::new("asset-checkout", "checkout").with_tier("tier-1").into())?;
    let orphan = g.add_node(AssetNode::new("asset-legacy-cron", "legacy-cron").into())?;
    g.add_edge(Edge::new(payments.clone(), checkout.clone(), EdgeKind::Owns))?;

    let lodash = g.add_node(CompNode::from_purl("pkg:npm/lodash@4.17.20").into())?;
    for asset in [&checkout, &orphan] {
        g.add_edge(Edge::depends_on(asset.clone(), lodash.clone(), true, Scope::Runtime, 1))?;
    }

    let signal = g.add_node(SignalNode::new("signal-lodash", "GHSA-lodash-0001", 9.8).into())?;
    g.add_edge(Edge::new(signal.clone(), lodash, EdgeKind::Affects))?;

    let show =
        |ids: std::collections::BTreeSet<NodeId>| ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ");
    println!("affected assets: {}", show(g.affected_assets(&signal)?));
    println!("affected units:  {}", show(g.affected_units(&signal)?));
    let metrics = g.governance_metrics(&signal)?;
    println!(
        "{} assets across {} units, {} without an owner: {}",
        metrics.asset_count,
        metrics.unit_count,
        metrics.gap_assets.len(),
        show(metrics.gap_assets.clone())
    );

    // the whole graph survives a JSON round trip and is re-validated on load
    let text = serde_json::to_string(&g.to_snapshot())?;
    let back = OrgGraph::from_snapshot(serde_json::from_str(&text)?)?;
    assert_eq!(back, g);
    println!(
        "snapshot: {} bytes, {} nodes, {} edges",
        text.len(),
        back.node_count(),
        back.edge_count()
    );
    Ok(())
}
