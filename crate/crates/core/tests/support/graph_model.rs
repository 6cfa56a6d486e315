//! Random graph generator and brute-force evaluations of the blast-radius
//! and risk definitions, shared by the oracle tests and the acceptance run.

#![allow(dead_code)]

use std::collections::BTreeSet;

use deptex_core::graph::{
    ActorNode, AssetNode, CompNode, Edge, EdgeKind, Node, NodeId, NodeKind, OrgGraph, OrgNode, Scope, SignalNode,
    TierDef, UnitNode,
};
use deptex_core::risk::{AggMode, EpdIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Generated {
    pub graph: OrgGraph,
    pub epd: EpdIndex,
}

pub fn generate(seed: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = OrgGraph::new();
    let tiers = ["default", "gold", "bronze"];
    g.add_tier(TierDef::new("gold", "Gold", rng.gen_range(1.0..4.0)))
        .unwrap();
    g.add_tier(TierDef::new("bronze", "Bronze", rng.gen_range(0.1..1.0)))
        .unwrap();

    let ids = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    let orgs = ids("o", rng.gen_range(1..=2));
    let units = ids("u", rng.gen_range(1..=6));
    let assets = ids("a", rng.gen_range(1..=12));
    let comps = ids("c", rng.gen_range(1..=12));
    let signals = ids("s", rng.gen_range(1..=5));
    let actors = ids("m", rng.gen_range(0..=3));

    for o in &orgs {
        g.add_node(OrgNode::new(o, o).into()).unwrap();
    }
    for u in &units {
        g.add_node(UnitNode::new(u, u).into()).unwrap();
    }
    for a in &assets {
        let node = AssetNode::new(a, a)
            .with_tier(tiers[rng.gen_range(0..tiers.len())])
            .with_exposure(rng.gen_range(0.0..=1.0))
            .critical(rng.gen_bool(0.3));
        g.add_node(node.into()).unwrap();
    }
    for c in &comps {
        g.add_node(CompNode::from_purl(&format!("pkg:npm/{c}@1.0.0")).into())
            .unwrap();
    }
    for s in &signals {
        let node = SignalNode::new(s, &format!("EXT-{s}"), rng.gen_range(0.0..=10.0))
            .with_confidence(rng.gen_range(0.0..=1.0));
        g.add_node(node.into()).unwrap();
    }
    for m in &actors {
        g.add_node(ActorNode::new(m, m).into()).unwrap();
    }
    let comp_id = |c: &String| NodeId::from(format!("pkg:npm/{c}@1.0.0").as_str());

    for o in &orgs {
        for u in &units {
            if rng.gen_bool(0.5) {
                g.add_edge(Edge::new(o.as_str(), u.as_str(), EdgeKind::Contains))
                    .unwrap();
            }
        }
    }
    for u in &units {
        for a in &assets {
            if rng.gen_bool(0.3) {
                g.add_edge(Edge::new(u.as_str(), a.as_str(), EdgeKind::Owns)).unwrap();
            }
        }
    }
    for a in &assets {
        for c in &comps {
            if rng.gen_bool(0.3) {
                let direct = rng.gen_bool(0.5);
                let depth = if direct { 1 } else { rng.gen_range(2..6) };
                let scope = [Scope::Runtime, Scope::Dev, Scope::Test][rng.gen_range(0..3)];
                g.add_edge(Edge::depends_on(a.as_str(), comp_id(c), direct, scope, depth))
                    .unwrap();
            }
        }
    }
    for s in &signals {
        for c in &comps {
            if rng.gen_bool(0.25) {
                g.add_edge(Edge::new(s.as_str(), comp_id(c), EdgeKind::Affects))
                    .unwrap();
            }
        }
    }
    for m in &actors {
        for c in &comps {
            if rng.gen_bool(0.3) {
                g.add_edge(Edge::new(m.as_str(), comp_id(c), EdgeKind::Maintains))
                    .unwrap();
            }
        }
    }

    let mut epd = EpdIndex::new();
    for s in &signals {
        for a in &assets {
            if rng.gen_bool(0.3) {
                epd.insert((s.as_str().into(), a.as_str().into()), rng.gen_range(0.0..=1.0));
            }
        }
    }
    Generated { graph: g, epd }
}

/// Every edge of `kind` as (src, dst, edge), read from the flat edge list.
pub fn edges_of(g: &OrgGraph, kind: EdgeKind) -> Vec<Edge> {
    g.edges().filter(|e| e.kind == kind).collect()
}

pub fn ids_of(g: &OrgGraph, kind: NodeKind) -> Vec<NodeId> {
    g.nodes().filter(|n| n.kind() == kind).map(|n| n.id().clone()).collect()
}

pub fn oracle_affected_assets(g: &OrgGraph, s: &NodeId) -> BTreeSet<NodeId> {
    let affects_edges = edges_of(g, EdgeKind::Affects);
    let depends_edges = edges_of(g, EdgeKind::DependsOn);
    let comps = ids_of(g, NodeKind::Comp);
    let mut out = BTreeSet::new();
    for a in ids_of(g, NodeKind::Asset) {
        for c in &comps {
            let affects = affects_edges.iter().any(|e| &e.src == s && &e.dst == c);
            let depends = depends_edges.iter().any(|e| e.src == a && &e.dst == c);
            if affects && depends {
                out.insert(a.clone());
            }
        }
    }
    out
}

pub fn oracle_owned(g: &OrgGraph, u: &NodeId, a: &NodeId) -> bool {
    edges_of(g, EdgeKind::Owns).iter().any(|e| &e.src == u && &e.dst == a)
}

pub fn oracle_gap(g: &OrgGraph, a: &NodeId) -> bool {
    !ids_of(g, NodeKind::Unit).iter().any(|u| oracle_owned(g, u, a))
}

pub fn oracle_affected_units(g: &OrgGraph, s: &NodeId) -> BTreeSet<NodeId> {
    let affected = oracle_affected_assets(g, s);
    ids_of(g, NodeKind::Unit)
        .into_iter()
        .filter(|u| affected.iter().any(|a| oracle_owned(g, u, a)))
        .collect()
}

/// φ written out directly from its definition.
pub fn oracle_contrib(g: &OrgGraph, epd: &EpdIndex, s: &NodeId, a: &NodeId) -> f64 {
    let Some(Node::Signal(sig)) = g.node(s) else { panic!() };
    let Some(Node::Asset(asset)) = g.node(a) else { panic!() };
    let importance = g.tier(&asset.tier).unwrap().importance;
    let gap = if oracle_gap(g, a) { 1.25 } else { 1.0 };
    let crit = if asset.critical { 1.25 } else { 1.0 };
    let exposure = epd.get(&(s.clone(), a.clone())).copied().unwrap_or(asset.exposure);
    let affected: BTreeSet<NodeId> = edges_of(g, EdgeKind::Affects)
        .into_iter()
        .filter(|e| &e.src == s)
        .map(|e| e.dst)
        .collect();
    let mut best = 0.0f64;
    for dep in edges_of(g, EdgeKind::DependsOn) {
        if &dep.src != a || !affected.contains(&dep.dst) {
            continue;
        }
        let direct = dep.attrs.get("direct").and_then(|v| v.as_bool()).unwrap_or(true);
        let scope = dep.attrs.get("scope").and_then(|v| v.as_str()).unwrap_or("runtime");
        let d = if direct { 1.0 } else { 0.8 };
        let sc = if scope == "runtime" { 1.0 } else { 0.3 };
        let c = sig.severity / 10.0 * sig.confidence * importance * exposure * d * sc * crit * gap;
        best = best.max(c);
    }
    best
}

pub fn oracle_agg(mode: AggMode, values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    match mode {
        AggMode::Sum => values.iter().sum(),
        AggMode::Max => values.iter().cloned().fold(f64::MIN, f64::max),
        AggMode::Mean => values.iter().sum::<f64>() / values.len() as f64,
    }
}

pub fn oracle_unit_risk(g: &OrgGraph, epd: &EpdIndex, s: &NodeId, u: &NodeId, mode: AggMode) -> f64 {
    let contribs: Vec<f64> = oracle_affected_assets(g, s)
        .iter()
        .filter(|a| oracle_owned(g, u, a))
        .map(|a| oracle_contrib(g, epd, s, a))
        .collect();
    oracle_agg(mode, &contribs)
}

pub fn oracle_org_risk(g: &OrgGraph, epd: &EpdIndex, s: &NodeId, mode: AggMode) -> f64 {
    let per_unit: Vec<f64> = ids_of(g, NodeKind::Unit)
        .iter()
        .map(|u| oracle_unit_risk(g, epd, s, u, mode))
        .collect();
    oracle_agg(mode, &per_unit)
}
