//! Small ready-made organizations used by the examples and tests.
//!
//! Each builder returns a fully populated [`OrgGraph`] plus the handles a
//! caller needs to exercise it. Identifiers are fixed so outputs are
//! reproducible.

use crate::graph::{
    AssetNode, CompNode, Edge, EdgeKind, NodeId, OrgGraph, OrgNode, Scope, SignalNode, TierDef, UnitNode,
};
use crate::ingest::{SbomComponent, SbomDocument};
use crate::reachability::{EntryKind, FlowKind, SliceEdge, SliceFunction, SliceReport};

fn add_unit_with_assets(g: &mut OrgGraph, org: &NodeId, unit: UnitNode, assets: Vec<AssetNode>) -> Vec<NodeId> {
    let unit = g.add_node(unit.into()).expect("fresh demo unit");
    g.add_edge(Edge::new(org.clone(), unit.clone(), EdgeKind::Contains))
        .expect("org contains unit");
    assets
        .into_iter()
        .map(|a| {
            let id = g.add_node(a.into()).expect("fresh demo asset");
            g.add_edge(Edge::new(unit.clone(), id.clone(), EdgeKind::Owns))
                .expect("unit owns asset");
            id
        })
        .collect()
}

/// One critical signal in a shared parsing library reaching ten assets.
pub struct TriageScenario {
    pub graph: OrgGraph,
    pub org: NodeId,
    pub signal: NodeId,
    /// Unit owning the two internet-facing assets.
    pub storefront: NodeId,
    pub public_assets: Vec<NodeId>,
    pub batch_assets: Vec<NodeId>,
    /// One slice per affected asset: public assets call the sink straight
    /// from a public HTTP handler, batch assets from a background job six
    /// hops away.
    pub slices: Vec<SliceReport>,
}

pub const TRIAGE_SEVERITY: f64 = 9.8;
pub const TRIAGE_PURL: &str = "pkg:maven/org.example/fastparse@2.4.0";

fn function(fn_id: &str, entry_kind: Option<EntryKind>) -> SliceFunction {
    SliceFunction {
        fn_id: fn_id.into(),
        name: fn_id.into(),
        file: format!("src/{fn_id}.java"),
        entry_kind,
        sanitizer: false,
        snippet: format!("void {fn_id}(byte[] input) {{ ... }}"),
    }
}

/// Slice where `entry` itself makes the vulnerable call.
pub fn direct_slice(asset: &NodeId, signal: &NodeId, entry_kind: EntryKind) -> SliceReport {
    SliceReport {
        asset_ref: asset.clone(),
        signal_ref: signal.clone(),
        functions: vec![function("handleUpload", Some(entry_kind))],
        edges: Vec::new(),
        entry_points: vec!["handleUpload".into()],
        sink: "handleUpload".into(),
    }
}

/// Slice where `entry` reaches the sink through a chain of `hops` calls.
pub fn chain_slice(asset: &NodeId, signal: &NodeId, entry_kind: EntryKind, hops: usize) -> SliceReport {
    let names: Vec<String> = (0..=hops)
        .map(|i| {
            if i == 0 {
                "nightlyImport".to_string()
            } else {
                format!("stage{i}")
            }
        })
        .collect();
    let functions = names
        .iter()
        .enumerate()
        .map(|(i, n)| function(n, (i == 0).then_some(entry_kind)))
        .collect();
    let edges = names
        .windows(2)
        .map(|w| SliceEdge {
            from: w[0].clone(),
            to: w[1].clone(),
            kind: FlowKind::Call,
        })
        .collect();
    SliceReport {
        asset_ref: asset.clone(),
        signal_ref: signal.clone(),
        functions,
        edges,
        entry_points: vec![names[0].clone()],
        sink: names[hops].clone(),
    }
}

/// Ten assets share a vulnerable parser. Two internet-facing services call
/// it straight from a public endpoint; eight batch services reach it only
/// from a nightly job six calls deep.
pub fn triage() -> TriageScenario {
    let mut g = OrgGraph::new();
    let org = g
        .add_node(OrgNode::new("org-acme", "Acme Corp").into())
        .expect("fresh org");
    let comp = g.add_node(CompNode::from_purl(TRIAGE_PURL).into()).expect("fresh comp");

    let public_assets = add_unit_with_assets(
        &mut g,
        &org,
        UnitNode::new("unit-storefront", "Storefront"),
        vec![
            AssetNode::new("asset-web-api", "web-api"),
            AssetNode::new("asset-upload-api", "upload-api"),
        ],
    );
    let mut batch_assets = Vec::new();
    for (unit, name, prefix) in [
        ("unit-data", "Data Platform", "etl"),
        ("unit-analytics", "Analytics", "report"),
    ] {
        let assets = (1..=4)
            .map(|i| AssetNode::new(&format!("asset-{prefix}-{i}"), &format!("{prefix}-job-{i}")))
            .collect();
        batch_assets.extend(add_unit_with_assets(&mut g, &org, UnitNode::new(unit, name), assets));
    }
    for a in public_assets.iter().chain(&batch_assets) {
        g.add_edge(Edge::depends_on(a.clone(), comp.clone(), true, Scope::Runtime, 1))
            .expect("asset depends on comp");
    }
    let signal = g
        .add_node(SignalNode::new("signal-fastparse", "DEMO-2024-0001", TRIAGE_SEVERITY).into())
        .expect("fresh signal");
    g.add_edge(Edge::new(signal.clone(), comp, EdgeKind::Affects))
        .expect("signal affects comp");

    let slices = public_assets
        .iter()
        .map(|a| direct_slice(a, &signal, EntryKind::PublicHttp))
        .chain(
            batch_assets
                .iter()
                .map(|a| chain_slice(a, &signal, EntryKind::BackgroundJob, 6)),
        )
        .collect();

    TriageScenario {
        graph: g,
        org,
        signal,
        storefront: NodeId::from("unit-storefront"),
        public_assets,
        batch_assets,
        slices,
    }
}

/// A zero-day reaching a tier-1 payment gateway and a tier-3 internal
/// dashboard.
pub struct RoutingScenario {
    pub graph: OrgGraph,
    pub org: NodeId,
    pub signal: NodeId,
    pub gateway: NodeId,
    pub dashboard: NodeId,
}

pub fn routing() -> RoutingScenario {
    let mut g = OrgGraph::new();
    g.add_tier(TierDef::new("tier-1", "Payment Gateway", 3.0))
        .expect("fresh tier");
    g.add_tier(TierDef::new("tier-3", "Internal Tooling", 0.5))
        .expect("fresh tier");
    let org = g
        .add_node(OrgNode::new("org-acme", "Acme Corp").into())
        .expect("fresh org");
    let gateway = add_unit_with_assets(
        &mut g,
        &org,
        UnitNode::new("unit-payments", "Payments"),
        vec![AssetNode::new("asset-payment-gateway", "payment-gateway")
            .with_tier("tier-1")
            .critical(true)],
    )
    .remove(0);
    let dashboard = add_unit_with_assets(
        &mut g,
        &org,
        UnitNode::new("unit-internal-tools", "Internal Tools"),
        vec![AssetNode::new("asset-analytics-dashboard", "analytics-dashboard")
            .with_tier("tier-3")
            .with_exposure(0.2)],
    )
    .remove(0);
    let comp = g
        .add_node(CompNode::from_purl("pkg:npm/fast-xml@3.1.0").into())
        .expect("fresh comp");
    for a in [&gateway, &dashboard] {
        g.add_edge(Edge::depends_on(a.clone(), comp.clone(), true, Scope::Runtime, 1))
            .expect("asset depends on comp");
    }
    let signal = g
        .add_node(SignalNode::new("signal-zero-day", "DEMO-2024-0002", 9.1).into())
        .expect("fresh signal");
    g.add_edge(Edge::new(signal.clone(), comp, EdgeKind::Affects))
        .expect("signal affects comp");
    RoutingScenario {
        graph: g,
        org,
        signal,
        gateway,
        dashboard,
    }
}

/// An asset plus the SBOMs before and after a pull request that adds one
/// AGPL-licensed library and upgrades another.
pub struct GateScenario {
    pub graph: OrgGraph,
    pub asset: NodeId,
    pub base: SbomDocument,
    pub head: SbomDocument,
}

fn component(purl: &str, licenses: &[&str]) -> SbomComponent {
    let c = CompNode::from_purl(purl);
    SbomComponent {
        purl: purl.into(),
        name: c.name,
        version: c.version,
        licenses: licenses.iter().map(|l| l.to_string()).collect(),
        direct: true,
        scope: Scope::Runtime,
        depth: 1,
    }
}

pub fn gate() -> GateScenario {
    let mut g = OrgGraph::new();
    let org = g
        .add_node(OrgNode::new("org-acme", "Acme Corp").into())
        .expect("fresh org");
    let asset = add_unit_with_assets(
        &mut g,
        &org,
        UnitNode::new("unit-payments", "Payments"),
        vec![AssetNode::new("asset-checkout", "checkout")],
    )
    .remove(0);
    let base = SbomDocument {
        asset_ref: asset.to_string(),
        components: vec![
            component("pkg:npm/express@4.18.2", &["MIT"]),
            component("pkg:npm/lodash@4.17.20", &["MIT"]),
        ],
    };
    let mut head = base.clone();
    head.components[1] = component("pkg:npm/lodash@4.17.21", &["MIT"]);
    head.components
        .push(component("pkg:npm/pdf-toolkit@2.0.0", &["AGPL-3.0-only"]));
    crate::ingest::apply_sbom(&mut g, &base, &asset).expect("base sbom applies");
    GateScenario {
        graph: g,
        asset,
        base,
        head,
    }
}
