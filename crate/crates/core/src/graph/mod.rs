//! Typed property graph of an organization.
//!
//! Nodes are Orgs, Units, Assets, Components, Actors and risk Signals.
//! Every edge is checked against [`TYPING_TABLE`] when it is inserted, so a
//! graph built through this API can never hold an ill-typed edge.

mod snapshot;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use snapshot::GraphSnapshot;
pub use types::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateId(NodeId),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("edge {src} -{kind}-> {dst} violates the typing table ({src_kind} -{kind}-> {dst_kind})")]
    TypeViolation {
        src: NodeId,
        dst: NodeId,
        kind: EdgeKind,
        src_kind: NodeKind,
        dst_kind: NodeKind,
    },
    #[error("edge endpoint `{0}` does not exist")]
    MissingEndpoint(NodeId),
    #[error("duplicate edge {src} -{kind}-> {dst}")]
    DuplicateEdge { src: NodeId, dst: NodeId, kind: EdgeKind },
    #[error("node `{0}` not found")]
    NotFound(NodeId),
    #[error("node `{id}` is a {actual}, expected {expected}")]
    WrongKind {
        id: NodeId,
        expected: NodeKind,
        actual: NodeKind,
    },
    #[error("unknown tier `{0}`")]
    UnknownTier(String),
    #[error("unknown status `{0}`")]
    UnknownStatus(String),
    #[error("duplicate definition `{0}`")]
    DuplicateDefinition(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Blast-radius summary of one signal.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GovernanceMetrics {
    pub asset_count: usize,
    pub unit_count: usize,
    pub gap_assets: BTreeSet<NodeId>,
}

/// A stored edge that no longer satisfies an invariant; reported by
/// [`OrgGraph::audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub subject: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrgGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeKey, Attrs>,
    out_edges: BTreeMap<NodeId, BTreeSet<EdgeKey>>,
    in_edges: BTreeMap<NodeId, BTreeSet<EdgeKey>>,
    tiers: BTreeMap<String, TierDef>,
    statuses: BTreeMap<String, StatusDef>,
    next_id: u64,
}

impl Default for OrgGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl OrgGraph {
    /// An empty graph holding only the reserved `default` tier and
    /// `unreviewed` status.
    pub fn new() -> Self {
        let mut tiers = BTreeMap::new();
        tiers.insert(DEFAULT_TIER.to_string(), TierDef::new(DEFAULT_TIER, "Default", 1.0));
        let mut statuses = BTreeMap::new();
        statuses.insert(
            DEFAULT_STATUS.to_string(),
            StatusDef::new(DEFAULT_STATUS, "Unreviewed", "gray"),
        );
        Self {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            out_edges: BTreeMap::new(),
            in_edges: BTreeMap::new(),
            tiers,
            statuses,
            next_id: 1,
        }
    }

    // ---- definitions -------------------------------------------------

    pub fn add_tier(&mut self, tier: TierDef) -> Result<()> {
        if tier.tier_id.is_empty() {
            return Err(invalid("tier_id", "must be non-empty"));
        }
        if !(tier.importance.is_finite() && tier.importance > 0.0) {
            return Err(invalid("importance", "must be > 0"));
        }
        if self.tiers.contains_key(&tier.tier_id) {
            return Err(GraphError::DuplicateDefinition(tier.tier_id));
        }
        self.tiers.insert(tier.tier_id.clone(), tier);
        Ok(())
    }

    /// Replaces an existing tier's name and importance.
    pub fn update_tier(&mut self, tier: TierDef) -> Result<()> {
        if !(tier.importance.is_finite() && tier.importance > 0.0) {
            return Err(invalid("importance", "must be > 0"));
        }
        match self.tiers.get_mut(&tier.tier_id) {
            Some(slot) => {
                *slot = tier;
                Ok(())
            }
            None => Err(GraphError::UnknownTier(tier.tier_id)),
        }
    }

    pub fn add_status(&mut self, status: StatusDef) -> Result<()> {
        if status.status_id.is_empty() {
            return Err(invalid("status_id", "must be non-empty"));
        }
        if self.statuses.contains_key(&status.status_id) {
            return Err(GraphError::DuplicateDefinition(status.status_id));
        }
        self.statuses.insert(status.status_id.clone(), status);
        Ok(())
    }

    pub fn tier(&self, tier_id: &str) -> Option<&TierDef> {
        self.tiers.get(tier_id)
    }

    pub fn status(&self, status_id: &str) -> Option<&StatusDef> {
        self.statuses.get(status_id)
    }

    pub fn tiers(&self) -> impl Iterator<Item = &TierDef> {
        self.tiers.values()
    }

    pub fn statuses(&self) -> impl Iterator<Item = &StatusDef> {
        self.statuses.values()
    }

    // ---- nodes -------------------------------------------------------

    /// Inserts `node`. An empty id is not representable, so callers that
    /// want a generated id use [`OrgGraph::fresh_id`] or
    /// [`OrgGraph::add_node_fields`].
    pub fn add_node(&mut self, node: Node) -> Result<NodeId> {
        self.validate_node(&node)?;
        let id = node.id().clone();
        if self.nodes.contains_key(&id) {
            return Err(GraphError::DuplicateId(id));
        }
        self.nodes.insert(id.clone(), node);
        Ok(id)
    }

    /// Builds and inserts a node from a loose attribute map. A fresh id is
    /// generated when `fields` carries none.
    pub fn add_node_fields(&mut self, kind: NodeKind, fields: &Attrs) -> Result<NodeId> {
        let mut fields = fields.clone();
        let has_id = matches!(fields.get("id"), Some(serde_json::Value::String(s)) if !s.trim().is_empty());
        if !has_id {
            fields.insert("id".into(), self.fresh_id(kind).to_string().into());
        }
        let node = Node::from_fields(kind, &fields)?;
        self.add_node(node)
    }

    /// A not-yet-used id of the form `<kind>-<n>`.
    pub fn fresh_id(&mut self, kind: NodeKind) -> NodeId {
        loop {
            let candidate = NodeId::from(format!("{}-{}", kind.id_prefix(), self.next_id).as_str());
            self.next_id += 1;
            if !self.nodes.contains_key(&candidate) {
                return candidate;
            }
        }
    }

    /// Replaces a node's fields in place, keeping its edges. The kind may
    /// not change.
    pub fn update_node(&mut self, node: Node) -> Result<()> {
        self.validate_node(&node)?;
        let current = self
            .nodes
            .get(node.id())
            .ok_or_else(|| GraphError::NotFound(node.id().clone()))?;
        if current.kind() != node.kind() {
            return Err(GraphError::WrongKind {
                id: node.id().clone(),
                expected: current.kind(),
                actual: node.kind(),
            });
        }
        self.nodes.insert(node.id().clone(), node);
        Ok(())
    }

    /// Removes a node and every incident edge.
    pub fn remove_node(&mut self, id: &NodeId) -> Result<Node> {
        let node = self.nodes.remove(id).ok_or_else(|| GraphError::NotFound(id.clone()))?;
        let incident: Vec<EdgeKey> = self
            .out_edges
            .get(id)
            .into_iter()
            .flatten()
            .chain(self.in_edges.get(id).into_iter().flatten())
            .cloned()
            .collect();
        for key in incident {
            self.unlink(&key);
        }
        self.out_edges.remove(id);
        self.in_edges.remove(id);
        Ok(node)
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.kind() == kind)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn expect_kind(&self, id: &NodeId, expected: NodeKind) -> Result<&Node> {
        let node = self.nodes.get(id).ok_or_else(|| GraphError::NotFound(id.clone()))?;
        if node.kind() != expected {
            return Err(GraphError::WrongKind {
                id: id.clone(),
                expected,
                actual: node.kind(),
            });
        }
        Ok(node)
    }

    pub fn asset(&self, id: &NodeId) -> Result<&AssetNode> {
        Ok(self.expect_kind(id, NodeKind::Asset)?.as_asset().expect("kind checked"))
    }

    pub fn signal(&self, id: &NodeId) -> Result<&SignalNode> {
        Ok(self
            .expect_kind(id, NodeKind::Signal)?
            .as_signal()
            .expect("kind checked"))
    }

    pub fn comp(&self, id: &NodeId) -> Result<&CompNode> {
        Ok(self.expect_kind(id, NodeKind::Comp)?.as_comp().expect("kind checked"))
    }

    /// Looks up a component node by its package-url.
    pub fn comp_by_purl(&self, purl: &str) -> Option<&CompNode> {
        self.nodes_of(NodeKind::Comp)
            .filter_map(Node::as_comp)
            .find(|c| c.purl == purl)
    }

    pub fn set_compliance_status(&mut self, asset: &NodeId, status_id: &str) -> Result<()> {
        if !self.statuses.contains_key(status_id) {
            return Err(GraphError::UnknownStatus(status_id.to_string()));
        }
        self.expect_kind(asset, NodeKind::Asset)?;
        if let Some(Node::Asset(a)) = self.nodes.get_mut(asset) {
            a.compliance_status = status_id.to_string();
        }
        Ok(())
    }

    pub fn set_tier(&mut self, asset: &NodeId, tier_id: &str) -> Result<()> {
        if !self.tiers.contains_key(tier_id) {
            return Err(GraphError::UnknownTier(tier_id.to_string()));
        }
        self.expect_kind(asset, NodeKind::Asset)?;
        if let Some(Node::Asset(a)) = self.nodes.get_mut(asset) {
            a.tier = tier_id.to_string();
        }
        Ok(())
    }

    fn validate_node(&self, node: &Node) -> Result<()> {
        match node {
            Node::Asset(a) => {
                if !(0.0..=1.0).contains(&a.exposure) {
                    return Err(invalid("exposure", "must be within [0, 1]"));
                }
                if !self.tiers.contains_key(&a.tier) {
                    return Err(GraphError::UnknownTier(a.tier.clone()));
                }
                if !self.statuses.contains_key(&a.compliance_status) {
                    return Err(GraphError::UnknownStatus(a.compliance_status.clone()));
                }
            }
            Node::Signal(s) => {
                if !(0.0..=10.0).contains(&s.severity) {
                    return Err(invalid("severity", "must be within [0, 10]"));
                }
                if !(0.0..=1.0).contains(&s.confidence) {
                    return Err(invalid("confidence", "must be within [0, 1]"));
                }
            }
            Node::Comp(c) => {
                if c.purl.is_empty() {
                    return Err(invalid("purl", "must be non-empty"));
                }
            }
            Node::Org(_) | Node::Unit(_) | Node::Actor(_) => {}
        }
        Ok(())
    }

    // ---- edges -------------------------------------------------------

    pub fn add_edge(&mut self, edge: Edge) -> Result<()> {
        let src_kind = self
            .nodes
            .get(&edge.src)
            .ok_or_else(|| GraphError::MissingEndpoint(edge.src.clone()))?
            .kind();
        let dst_kind = self
            .nodes
            .get(&edge.dst)
            .ok_or_else(|| GraphError::MissingEndpoint(edge.dst.clone()))?
            .kind();
        if !typing_admits(src_kind, edge.kind, dst_kind) {
            return Err(GraphError::TypeViolation {
                src: edge.src,
                dst: edge.dst,
                kind: edge.kind,
                src_kind,
                dst_kind,
            });
        }
        validate_edge_attrs(&edge)?;
        let key = edge.key();
        if self.edges.contains_key(&key) {
            return Err(GraphError::DuplicateEdge {
                src: edge.src,
                dst: edge.dst,
                kind: edge.kind,
            });
        }
        self.out_edges.entry(key.src.clone()).or_default().insert(key.clone());
        self.in_edges.entry(key.dst.clone()).or_default().insert(key.clone());
        self.edges.insert(key, edge.attrs);
        Ok(())
    }

    /// Inserts or overwrites the attributes of an edge.
    pub fn upsert_edge(&mut self, edge: Edge) -> Result<()> {
        let key = edge.key();
        if let Some(attrs) = self.edges.get_mut(&key) {
            validate_edge_attrs(&edge)?;
            *attrs = edge.attrs;
            Ok(())
        } else {
            self.add_edge(edge)
        }
    }

    pub fn remove_edge(&mut self, src: &NodeId, dst: &NodeId, kind: EdgeKind) -> Result<Edge> {
        let key = EdgeKey {
            src: src.clone(),
            kind,
            dst: dst.clone(),
        };
        let attrs = self.unlink(&key).ok_or_else(|| GraphError::NotFound(dst.clone()))?;
        Ok(Edge {
            src: key.src,
            dst: key.dst,
            kind,
            attrs,
        })
    }

    fn unlink(&mut self, key: &EdgeKey) -> Option<Attrs> {
        let attrs = self.edges.remove(key)?;
        if let Some(set) = self.out_edges.get_mut(&key.src) {
            set.remove(key);
        }
        if let Some(set) = self.in_edges.get_mut(&key.dst) {
            set.remove(key);
        }
        Some(attrs)
    }

    pub fn edge(&self, src: &NodeId, dst: &NodeId, kind: EdgeKind) -> Option<Edge> {
        let key = EdgeKey {
            src: src.clone(),
            kind,
            dst: dst.clone(),
        };
        self.edges.get(&key).map(|attrs| Edge {
            src: key.src.clone(),
            dst: key.dst.clone(),
            kind,
            attrs: attrs.clone(),
        })
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(k, attrs)| Edge {
            src: k.src.clone(),
            dst: k.dst.clone(),
            kind: k.kind,
            attrs: attrs.clone(),
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Targets of `kind` edges leaving `id`, sorted.
    pub fn out_neighbors(&self, id: &NodeId, kind: EdgeKind) -> impl Iterator<Item = &NodeId> {
        self.out_edges
            .get(id)
            .into_iter()
            .flatten()
            .filter(move |k| k.kind == kind)
            .map(|k| &k.dst)
    }

    /// Sources of `kind` edges entering `id`, sorted.
    pub fn in_neighbors(&self, id: &NodeId, kind: EdgeKind) -> impl Iterator<Item = &NodeId> {
        self.in_edges
            .get(id)
            .into_iter()
            .flatten()
            .filter(move |k| k.kind == kind)
            .map(|k| &k.src)
    }

    pub fn out_edges_of(&self, id: &NodeId, kind: EdgeKind) -> Vec<Edge> {
        self.out_neighbors(id, kind)
            .filter_map(|dst| self.edge(id, dst, kind))
            .collect()
    }

    // ---- queries -----------------------------------------------------

    /// True iff no Unit owns `asset`.
    pub fn ownership_gap(&self, asset: &NodeId) -> Result<bool> {
        self.expect_kind(asset, NodeKind::Asset)?;
        Ok(self.owners(asset).next().is_none())
    }

    /// Units owning `asset`.
    pub fn owners<'a>(&'a self, asset: &NodeId) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.in_neighbors(asset, EdgeKind::Owns)
            .filter(|u| self.node(u).map(Node::kind) == Some(NodeKind::Unit))
    }

    /// Components a signal affects.
    pub fn affected_components(&self, signal: &NodeId) -> Result<BTreeSet<NodeId>> {
        self.expect_kind(signal, NodeKind::Signal)?;
        Ok(self.out_neighbors(signal, EdgeKind::Affects).cloned().collect())
    }

    /// Assets with a `depends_on` edge to any component `signal` affects.
    pub fn affected_assets(&self, signal: &NodeId) -> Result<BTreeSet<NodeId>> {
        let comps = self.affected_components(signal)?;
        Ok(comps
            .iter()
            .flat_map(|c| self.in_neighbors(c, EdgeKind::DependsOn))
            .filter(|a| self.node(a).map(Node::kind) == Some(NodeKind::Asset))
            .cloned()
            .collect())
    }

    /// Units owning at least one affected asset.
    pub fn affected_units(&self, signal: &NodeId) -> Result<BTreeSet<NodeId>> {
        let assets = self.affected_assets(signal)?;
        Ok(assets.iter().flat_map(|a| self.owners(a)).cloned().collect())
    }

    pub fn governance_metrics(&self, signal: &NodeId) -> Result<GovernanceMetrics> {
        let assets = self.affected_assets(signal)?;
        let units = self.affected_units(signal)?;
        let mut gap_assets = BTreeSet::new();
        for a in &assets {
            if self.ownership_gap(a)? {
                gap_assets.insert(a.clone());
            }
        }
        Ok(GovernanceMetrics {
            asset_count: assets.len(),
            unit_count: units.len(),
            gap_assets,
        })
    }

    /// `depends_on` edges from `asset` to components affected by `signal`.
    pub fn affecting_dependencies(&self, signal: &NodeId, asset: &NodeId) -> Result<Vec<Edge>> {
        let comps = self.affected_components(signal)?;
        self.expect_kind(asset, NodeKind::Asset)?;
        Ok(self
            .out_edges_of(asset, EdgeKind::DependsOn)
            .into_iter()
            .filter(|e| comps.contains(&e.dst))
            .collect())
    }

    /// Signals affecting any component `asset` depends on.
    pub fn signals_affecting(&self, asset: &NodeId) -> Result<BTreeSet<NodeId>> {
        self.expect_kind(asset, NodeKind::Asset)?;
        Ok(self
            .out_neighbors(asset, EdgeKind::DependsOn)
            .flat_map(|c| self.in_neighbors(c, EdgeKind::Affects))
            .cloned()
            .collect())
    }

    /// Units contained by `org`.
    pub fn units_of(&self, org: &NodeId) -> Result<BTreeSet<NodeId>> {
        self.expect_kind(org, NodeKind::Org)?;
        Ok(self.out_neighbors(org, EdgeKind::Contains).cloned().collect())
    }

    /// Assets owned by `unit`.
    pub fn assets_of(&self, unit: &NodeId) -> Result<BTreeSet<NodeId>> {
        self.expect_kind(unit, NodeKind::Unit)?;
        Ok(self.out_neighbors(unit, EdgeKind::Owns).cloned().collect())
    }

    /// Number of Actors maintaining `comp`.
    pub fn maintainer_count(&self, comp: &NodeId) -> usize {
        self.in_neighbors(comp, EdgeKind::Maintains).count()
    }

    /// Re-checks every stored edge and node against the graph invariants.
    pub fn audit(&self) -> Vec<AuditViolation> {
        let mut out = Vec::new();
        for node in self.nodes.values() {
            if let Err(e) = self.validate_node(node) {
                out.push(AuditViolation {
                    subject: node.id().to_string(),
                    reason: e.to_string(),
                });
            }
        }
        for edge in self.edges() {
            let subject = format!("{} -{}-> {}", edge.src, edge.kind, edge.dst);
            let (Some(src), Some(dst)) = (self.nodes.get(&edge.src), self.nodes.get(&edge.dst)) else {
                out.push(AuditViolation {
                    subject,
                    reason: "dangling endpoint".into(),
                });
                continue;
            };
            if !typing_admits(src.kind(), edge.kind, dst.kind()) {
                out.push(AuditViolation {
                    subject,
                    reason: format!("{} -{}-> {} not in typing table", src.kind(), edge.kind, dst.kind()),
                });
            } else if let Err(e) = validate_edge_attrs(&edge) {
                out.push(AuditViolation {
                    subject,
                    reason: e.to_string(),
                });
            }
        }
        out
    }
}

fn invalid(field: &str, reason: &str) -> GraphError {
    GraphError::InvalidField {
        field: field.into(),
        reason: reason.into(),
    }
}

fn validate_edge_attrs(edge: &Edge) -> Result<()> {
    if edge.kind != EdgeKind::DependsOn {
        return Ok(());
    }
    if let Some(v) = edge.attrs.get("direct") {
        if !v.is_boolean() {
            return Err(invalid("direct", "must be a boolean"));
        }
    }
    if let Some(v) = edge.attrs.get("scope") {
        if v.as_str().and_then(Scope::parse).is_none() {
            return Err(invalid("scope", "must be one of runtime, dev, test"));
        }
    }
    if let Some(v) = edge.attrs.get("depth") {
        match v.as_u64() {
            Some(d) if d >= 1 => {}
            _ => return Err(invalid("depth", "must be an integer >= 1")),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asset(id: &str) -> Node {
        Node::Asset(AssetNode {
            id: id.into(),
            name: id.into(),
            tier: DEFAULT_TIER.into(),
            compliance_status: DEFAULT_STATUS.into(),
            exposure: 1.0,
            critical: false,
            attrs: Attrs::new(),
        })
    }

    fn simple(kind: NodeKind, id: &str) -> Node {
        let mut f = Attrs::new();
        f.insert("id".into(), id.into());
        f.insert("name".into(), id.into());
        match kind {
            NodeKind::Comp => {
                f.insert("purl".into(), format!("pkg:npm/{id}@1.0.0").into());
            }
            NodeKind::Signal => {
                f.insert("external_id".into(), id.to_uppercase().into());
                f.insert("severity".into(), 5.0.into());
            }
            _ => {}
        }
        Node::from_fields(kind, &f).unwrap()
    }

    fn fixture() -> OrgGraph {
        let mut g = OrgGraph::new();
        g.add_node(simple(NodeKind::Org, "org1")).unwrap();
        g.add_node(simple(NodeKind::Unit, "unit1")).unwrap();
        g.add_node(asset("asset1")).unwrap();
        g.add_node(asset("asset2")).unwrap();
        g.add_node(simple(NodeKind::Comp, "comp1")).unwrap();
        g.add_node(simple(NodeKind::Signal, "sig1")).unwrap();
        g
    }

    #[test]
    fn add_node_examples() {
        let mut g = OrgGraph::new();
        let mut f = Attrs::new();
        f.insert("name".into(), "pay-gw".into());
        f.insert("exposure".into(), 1.0.into());
        f.insert("critical".into(), true.into());
        let a = g.add_node_fields(NodeKind::Asset, &f).unwrap();
        assert!(g.asset(&a).unwrap().critical);

        let mut s = Attrs::new();
        s.insert("external_id".into(), "CVE-2024-0001".into());
        s.insert("severity".into(), 9.8.into());
        s.insert("confidence".into(), 1.0.into());
        let sid = g.add_node_fields(NodeKind::Signal, &s).unwrap();
        assert_ne!(a, sid);

        s.insert("severity".into(), 11.into());
        assert!(matches!(
            g.add_node_fields(NodeKind::Signal, &s),
            Err(GraphError::InvalidField { .. })
        ));
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut g = fixture();
        assert_eq!(
            g.add_node(asset("asset1")),
            Err(GraphError::DuplicateId("asset1".into()))
        );
    }

    #[test]
    fn asset_tier_must_exist() {
        let mut g = OrgGraph::new();
        let Node::Asset(mut a) = asset("a") else { unreachable!() };
        a.tier = "tier-9".into();
        assert_eq!(
            g.add_node(Node::Asset(a)),
            Err(GraphError::UnknownTier("tier-9".into()))
        );
    }

    #[test]
    fn add_edge_examples() {
        let mut g = fixture();
        g.add_edge(Edge::new("unit1", "asset1", EdgeKind::Owns)).unwrap();
        assert!(matches!(
            g.add_edge(Edge::new("org1", "comp1", EdgeKind::Owns)),
            Err(GraphError::TypeViolation { .. })
        ));
        g.add_edge(Edge::depends_on("asset1", "comp1", false, Scope::Dev, 2))
            .unwrap();
        let e = g.edge(&"asset1".into(), &"comp1".into(), EdgeKind::DependsOn).unwrap();
        assert!(!e.direct());
        assert_eq!(e.scope(), Scope::Dev);
        assert!(matches!(
            g.add_edge(Edge::new("unit1", "asset1", EdgeKind::Owns)),
            Err(GraphError::DuplicateEdge { .. })
        ));
        assert_eq!(
            g.add_edge(Edge::new("unit1", "nope", EdgeKind::Owns)),
            Err(GraphError::MissingEndpoint("nope".into()))
        );
    }

    #[test]
    fn bad_scope_attribute_rejected() {
        let mut g = fixture();
        let e = Edge::new("asset1", "comp1", EdgeKind::DependsOn).with_attr("scope", "prod");
        assert!(matches!(g.add_edge(e), Err(GraphError::InvalidField { .. })));
    }

    #[test]
    fn ownership_gap_cases() {
        let mut g = fixture();
        assert!(g.ownership_gap(&"asset1".into()).unwrap());
        g.add_edge(Edge::new("unit1", "asset1", EdgeKind::Owns)).unwrap();
        assert!(!g.ownership_gap(&"asset1".into()).unwrap());
        g.add_node(simple(NodeKind::Unit, "unit2")).unwrap();
        g.add_edge(Edge::new("unit2", "asset1", EdgeKind::Owns)).unwrap();
        assert!(!g.ownership_gap(&"asset1".into()).unwrap());
        assert!(matches!(
            g.ownership_gap(&"unit1".into()),
            Err(GraphError::WrongKind { .. })
        ));
        assert_eq!(g.ownership_gap(&"x".into()), Err(GraphError::NotFound("x".into())));
    }

    #[test]
    fn gap_flips_when_last_owner_removed() {
        let mut g = fixture();
        g.add_node(simple(NodeKind::Unit, "unit2")).unwrap();
        g.add_edge(Edge::new("unit1", "asset1", EdgeKind::Owns)).unwrap();
        g.add_edge(Edge::new("unit2", "asset1", EdgeKind::Owns)).unwrap();
        g.remove_edge(&"unit1".into(), &"asset1".into(), EdgeKind::Owns)
            .unwrap();
        assert!(!g.ownership_gap(&"asset1".into()).unwrap());
        g.remove_node(&"unit2".into()).unwrap();
        assert!(g.ownership_gap(&"asset1".into()).unwrap());
    }

    #[test]
    fn blast_radius_and_metrics() {
        let mut g = fixture();
        g.add_edge(Edge::new("sig1", "comp1", EdgeKind::Affects)).unwrap();
        let m = g.governance_metrics(&"sig1".into()).unwrap();
        assert_eq!(
            m,
            GovernanceMetrics {
                asset_count: 0,
                unit_count: 0,
                gap_assets: BTreeSet::new()
            }
        );

        g.add_edge(Edge::depends_on("asset1", "comp1", true, Scope::Runtime, 1))
            .unwrap();
        g.add_edge(Edge::depends_on("asset2", "comp1", true, Scope::Runtime, 1))
            .unwrap();
        g.add_edge(Edge::new("unit1", "asset1", EdgeKind::Owns)).unwrap();
        let assets = g.affected_assets(&"sig1".into()).unwrap();
        assert_eq!(
            assets.into_iter().collect::<Vec<_>>(),
            vec!["asset1".into(), "asset2".into()]
        );
        let m = g.governance_metrics(&"sig1".into()).unwrap();
        assert_eq!(m.asset_count, 2);
        assert_eq!(m.unit_count, 1);
        assert_eq!(
            m.gap_assets.into_iter().collect::<Vec<_>>(),
            vec![NodeId::from("asset2")]
        );
    }

    #[test]
    fn remove_node_cascades() {
        let mut g = fixture();
        g.add_edge(Edge::new("unit1", "asset1", EdgeKind::Owns)).unwrap();
        g.add_edge(Edge::depends_on("asset1", "comp1", true, Scope::Runtime, 1))
            .unwrap();
        g.remove_node(&"asset1".into()).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(g.audit().is_empty());
    }

    #[test]
    fn queries_are_pure() {
        let mut g = fixture();
        g.add_edge(Edge::new("sig1", "comp1", EdgeKind::Affects)).unwrap();
        g.add_edge(Edge::depends_on("asset1", "comp1", true, Scope::Runtime, 1))
            .unwrap();
        let before = g.clone();
        let a = g.affected_assets(&"sig1".into()).unwrap();
        let b = g.affected_assets(&"sig1".into()).unwrap();
        assert_eq!(a, b);
        assert_eq!(before, g);
    }
}
