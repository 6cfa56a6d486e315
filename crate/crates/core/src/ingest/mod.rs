//! Mapping external documents into graph mutations.

mod cvss;
mod osv;
mod sbom;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CompNode, Edge, EdgeKind, GraphError, Node, NodeId, NodeKind, OrgGraph, SignalNode};
use crate::purl::Purl;
use crate::version::Version;

pub use osv::{parse_vuln_feed, AffectedPurl, VulnFeedEntry};
pub use sbom::{parse_sbom, SbomComponent, SbomDocument};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("malformed range: {0}")]
    MalformedRange(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub added: usize,
    pub removed: usize,
}

/// Makes the `depends_on` edges leaving `asset` mirror `doc` exactly.
/// Components are created on demand, keyed by purl; stale edges are
/// removed and changed edge attributes are overwritten.
pub fn apply_sbom(graph: &mut OrgGraph, doc: &SbomDocument, asset: &NodeId) -> Result<ApplyReport, IngestError> {
    doc.validate()?;
    graph.asset(asset)?;

    let mut desired: BTreeMap<NodeId, &SbomComponent> = BTreeMap::new();
    for c in &doc.components {
        let id = ensure_component(graph, c)?;
        desired.insert(id, c);
    }

    let current: BTreeSet<NodeId> = graph.out_neighbors(asset, EdgeKind::DependsOn).cloned().collect();
    let mut removed = 0;
    for stale in current.iter().filter(|c| !desired.contains_key(*c)) {
        graph.remove_edge(asset, stale, EdgeKind::DependsOn)?;
        removed += 1;
    }
    let mut added = 0;
    for (comp, c) in &desired {
        let edge = Edge::depends_on(asset.clone(), comp.clone(), c.direct, c.scope, c.depth);
        if !current.contains(comp) {
            added += 1;
        }
        graph.upsert_edge(edge)?;
    }
    Ok(ApplyReport { added, removed })
}

fn ensure_component(graph: &mut OrgGraph, c: &SbomComponent) -> Result<NodeId, IngestError> {
    if let Some(existing) = graph.comp_by_purl(&c.purl) {
        let mut updated = existing.clone();
        if !c.licenses.is_empty() && updated.licenses != c.licenses {
            updated.licenses = c.licenses.clone();
            let id = updated.id.clone();
            graph.update_node(Node::Comp(updated))?;
            return Ok(id);
        }
        return Ok(updated.id);
    }
    let id = NodeId::new(c.purl.clone())?;
    graph.add_node(Node::Comp(CompNode {
        id: id.clone(),
        purl: c.purl.clone(),
        name: c.name.clone(),
        version: c.version.clone(),
        licenses: c.licenses.clone(),
        attrs: Default::default(),
    }))?;
    Ok(id)
}

/// True when `entry` lists `comp`'s package with a range containing its
/// version.
pub fn entry_matches(entry: &VulnFeedEntry, comp: &CompNode) -> bool {
    let key = Purl::package_key(&comp.purl);
    let comp_version = if comp.version.is_empty() {
        Purl::parse(&comp.purl).version.unwrap_or_default()
    } else {
        comp.version.clone()
    };
    entry
        .affected_purls
        .iter()
        .any(|a| Purl::package_key(&a.purl) == key && a.version_range.contains(&comp_version))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMatch {
    pub signal: SignalNode,
    pub components: Vec<NodeId>,
}

/// Creates one Signal per entry that affects at least one stored component
/// and links it with `affects` edges. A signal whose `external_id` already
/// exists is refreshed in place. All entries are validated before the graph
/// is touched.
pub fn match_vulnerabilities(graph: &mut OrgGraph, entries: &[VulnFeedEntry]) -> Result<Vec<SignalMatch>, IngestError> {
    for e in entries {
        e.validate()?;
    }
    let comps: Vec<CompNode> = graph
        .nodes_of(NodeKind::Comp)
        .filter_map(Node::as_comp)
        .cloned()
        .collect();

    let mut out = Vec::new();
    for entry in entries {
        let matched: Vec<NodeId> = comps
            .iter()
            .filter(|c| entry_matches(entry, c))
            .map(|c| c.id.clone())
            .collect();
        if matched.is_empty() {
            continue;
        }
        let existing = graph
            .nodes_of(NodeKind::Signal)
            .filter_map(Node::as_signal)
            .find(|s| s.external_id == entry.external_id)
            .map(|s| s.id.clone());
        let id = match existing {
            Some(id) => id,
            None => graph.fresh_id(NodeKind::Signal),
        };
        let signal = SignalNode {
            id: id.clone(),
            external_id: entry.external_id.clone(),
            severity: entry.severity_cvss,
            confidence: entry.confidence,
            description: entry.description.clone(),
        };
        if graph.contains(&id) {
            graph.update_node(Node::Signal(signal.clone()))?;
        } else {
            graph.add_node(Node::Signal(signal.clone()))?;
        }
        for comp in &matched {
            graph.upsert_edge(Edge::new(id.clone(), comp.clone(), EdgeKind::Affects))?;
        }
        out.push(SignalMatch {
            signal,
            components: matched,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Upgrade {
    /// Versionless package-url.
    pub package: String,
    pub name: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DependencyDelta {
    pub added: Vec<SbomComponent>,
    pub removed: Vec<SbomComponent>,
    pub upgraded: Vec<Upgrade>,
}

impl DependencyDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.upgraded.is_empty()
    }

    /// Licenses introduced by added components, sorted and deduplicated.
    pub fn added_licenses(&self) -> Vec<String> {
        self.added
            .iter()
            .flat_map(|c| c.licenses.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Partitions the change between two SBOMs by package identity (the purl
/// without its version). A package whose version changed is an upgrade.
/// When a package appears in several versions, versions present on both
/// sides are unchanged and the remaining ones are paired in ascending
/// order; leftovers are plain additions or removals.
pub fn dependency_delta(old: &SbomDocument, new: &SbomDocument) -> DependencyDelta {
    fn group(doc: &SbomDocument) -> BTreeMap<String, Vec<&SbomComponent>> {
        let mut map: BTreeMap<String, Vec<&SbomComponent>> = BTreeMap::new();
        for c in &doc.components {
            map.entry(Purl::package_key(&c.purl)).or_default().push(c);
        }
        for list in map.values_mut() {
            list.sort_by(|a, b| Version::parse(&a.version).cmp(&Version::parse(&b.version)));
        }
        map
    }
    let old_groups = group(old);
    let new_groups = group(new);
    let keys: BTreeSet<&String> = old_groups.keys().chain(new_groups.keys()).collect();

    let mut delta = DependencyDelta::default();
    for key in keys {
        let olds = old_groups.get(key).cloned().unwrap_or_default();
        let news = new_groups.get(key).cloned().unwrap_or_default();
        let gone: Vec<&SbomComponent> = olds
            .iter()
            .filter(|o| !news.iter().any(|n| n.version == o.version))
            .copied()
            .collect();
        let fresh: Vec<&SbomComponent> = news
            .iter()
            .filter(|n| !olds.iter().any(|o| o.version == n.version))
            .copied()
            .collect();
        let paired = gone.len().min(fresh.len());
        for (o, n) in gone.iter().zip(fresh.iter()).take(paired) {
            delta.upgraded.push(Upgrade {
                package: key.clone(),
                name: n.name.clone(),
                from: o.version.clone(),
                to: n.version.clone(),
            });
        }
        delta.removed.extend(gone[paired..].iter().map(|c| (*c).clone()));
        delta.added.extend(fresh[paired..].iter().map(|c| (*c).clone()));
    }
    delta
}
