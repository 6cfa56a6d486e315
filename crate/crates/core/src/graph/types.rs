use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Free-form attribute map carried by nodes and edges.
pub type Attrs = BTreeMap<String, serde_json::Value>;

/// Opaque, non-empty node identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(value: impl Into<String>) -> Result<Self, GraphError> {
        let value = value.into();
        if value.trim().is_empty() {
            return Err(GraphError::InvalidField {
                field: "id".into(),
                reason: "node id must be non-empty".into(),
            });
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeId {
    type Error = GraphError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        NodeId::new(value)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> Self {
        id.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    /// Panics on an empty string; intended for literals in fixtures.
    fn from(s: &str) -> Self {
        NodeId::new(s).expect("node id literal must be non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Org,
    Unit,
    Asset,
    Comp,
    Actor,
    Signal,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Org,
        NodeKind::Unit,
        NodeKind::Asset,
        NodeKind::Comp,
        NodeKind::Actor,
        NodeKind::Signal,
    ];

    pub(crate) fn id_prefix(self) -> &'static str {
        match self {
            NodeKind::Org => "org",
            NodeKind::Unit => "unit",
            NodeKind::Asset => "asset",
            NodeKind::Comp => "comp",
            NodeKind::Actor => "actor",
            NodeKind::Signal => "signal",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Contains,
    Owns,
    DependsOn,
    Affects,
    Maintains,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Contains => "contains",
            EdgeKind::Owns => "owns",
            EdgeKind::DependsOn => "depends_on",
            EdgeKind::Affects => "affects",
            EdgeKind::Maintains => "maintains",
        })
    }
}

/// The admitted `(source kind, edge kind, target kind)` rows.
pub const TYPING_TABLE: [(NodeKind, EdgeKind, NodeKind); 5] = [
    (NodeKind::Org, EdgeKind::Contains, NodeKind::Unit),
    (NodeKind::Unit, EdgeKind::Owns, NodeKind::Asset),
    (NodeKind::Asset, EdgeKind::DependsOn, NodeKind::Comp),
    (NodeKind::Signal, EdgeKind::Affects, NodeKind::Comp),
    (NodeKind::Actor, EdgeKind::Maintains, NodeKind::Comp),
];

pub fn typing_admits(src: NodeKind, kind: EdgeKind, dst: NodeKind) -> bool {
    TYPING_TABLE.contains(&(src, kind, dst))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Runtime,
    Dev,
    Test,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Runtime => "runtime",
            Scope::Dev => "dev",
            Scope::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Scope> {
        match s {
            "runtime" => Some(Scope::Runtime),
            "dev" => Some(Scope::Dev),
            "test" => Some(Scope::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

impl Edge {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>, kind: EdgeKind) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            kind,
            attrs: Attrs::new(),
        }
    }

    pub fn depends_on(
        asset: impl Into<NodeId>,
        comp: impl Into<NodeId>,
        direct: bool,
        scope: Scope,
        depth: u32,
    ) -> Self {
        let mut edge = Edge::new(asset, comp, EdgeKind::DependsOn);
        edge.attrs.insert("direct".into(), direct.into());
        edge.attrs.insert("scope".into(), scope.as_str().into());
        edge.attrs.insert("depth".into(), depth.into());
        edge
    }

    pub fn with_attr(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.attrs.insert(key.to_string(), value.into());
        self
    }

    /// `direct` attribute of a `depends_on` edge; absent means direct.
    pub fn direct(&self) -> bool {
        self.attrs.get("direct").and_then(|v| v.as_bool()).unwrap_or(true)
    }

    pub fn scope(&self) -> Scope {
        self.attrs
            .get("scope")
            .and_then(|v| v.as_str())
            .and_then(Scope::parse)
            .unwrap_or_default()
    }

    pub fn depth(&self) -> u32 {
        self.attrs
            .get("depth")
            .and_then(|v| v.as_u64())
            .map(|d| d as u32)
            .unwrap_or(if self.direct() { 1 } else { 2 })
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey {
            src: self.src.clone(),
            kind: self.kind,
            dst: self.dst.clone(),
        }
    }
}

/// Identity of an edge: no two stored edges share `(src, kind, dst)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub src: NodeId,
    pub kind: EdgeKind,
    pub dst: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierDef {
    pub tier_id: String,
    pub name: String,
    pub importance: f64,
}

impl TierDef {
    pub fn new(tier_id: &str, name: &str, importance: f64) -> Self {
        Self {
            tier_id: tier_id.into(),
            name: name.into(),
            importance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusDef {
    pub status_id: String,
    pub name: String,
    #[serde(default)]
    pub color_hint: String,
}

impl StatusDef {
    pub fn new(status_id: &str, name: &str, color_hint: &str) -> Self {
        Self {
            status_id: status_id.into(),
            name: name.into(),
            color_hint: color_hint.into(),
        }
    }
}

pub const DEFAULT_TIER: &str = "default";
pub const DEFAULT_STATUS: &str = "unreviewed";

fn default_tier() -> String {
    DEFAULT_TIER.into()
}

fn default_status() -> String {
    DEFAULT_STATUS.into()
}

fn default_exposure() -> f64 {
    1.0
}

fn default_confidence() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrgNode {
    pub id: NodeId,
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitNode {
    pub id: NodeId,
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetNode {
    pub id: NodeId,
    pub name: String,
    #[serde(default = "default_tier")]
    pub tier: String,
    #[serde(default = "default_status")]
    pub compliance_status: String,
    #[serde(default = "default_exposure")]
    pub exposure: f64,
    #[serde(default)]
    pub critical: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompNode {
    pub id: NodeId,
    pub purl: String,
    pub name: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub licenses: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorNode {
    pub id: NodeId,
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalNode {
    pub id: NodeId,
    pub external_id: String,
    pub severity: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub description: String,
}

impl OrgNode {
    pub fn new(id: &str, name: &str) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            attrs: Attrs::new(),
        }
    }
}

impl UnitNode {
    pub fn new(id: &str, name: &str) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            attrs: Attrs::new(),
        }
    }
}

impl AssetNode {
    /// Asset in the default tier and status, fully exposed, not critical.
    pub fn new(id: &str, name: &str) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            tier: default_tier(),
            compliance_status: default_status(),
            exposure: default_exposure(),
            critical: false,
            attrs: Attrs::new(),
        }
    }

    pub fn with_tier(mut self, tier_id: &str) -> Self {
        self.tier = tier_id.into();
        self
    }

    pub fn with_exposure(mut self, exposure: f64) -> Self {
        self.exposure = exposure;
        self
    }

    pub fn critical(mut self, critical: bool) -> Self {
        self.critical = critical;
        self
    }
}

impl CompNode {
    /// Component whose id is its purl; name and version come from the purl.
    pub fn from_purl(purl: &str) -> Self {
        let parts = crate::purl::Purl::parse(purl);
        Self {
            id: purl.into(),
            purl: purl.into(),
            name: parts.name,
            version: parts.version.unwrap_or_default(),
            licenses: Vec::new(),
            attrs: Attrs::new(),
        }
    }

    pub fn with_licenses(mut self, licenses: &[&str]) -> Self {
        self.licenses = licenses.iter().map(|l| l.to_string()).collect();
        self
    }
}

impl ActorNode {
    pub fn new(id: &str, name: &str) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            attrs: Attrs::new(),
        }
    }
}

impl SignalNode {
    /// Signal with full confidence and no description.
    pub fn new(id: &str, external_id: &str, severity: f64) -> Self {
        Self {
            id: id.into(),
            external_id: external_id.into(),
            severity,
            confidence: default_confidence(),
            description: String::new(),
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }
}

macro_rules! node_from {
    ($($variant:ident($ty:ty)),*) => {
        $(impl From<$ty> for Node {
            fn from(n: $ty) -> Self {
                Node::$variant(n)
            }
        })*
    };
}

node_from!(
    Org(OrgNode),
    Unit(UnitNode),
    Asset(AssetNode),
    Comp(CompNode),
    Actor(ActorNode),
    Signal(SignalNode)
);

/// A graph node; the `kind` tag is the node type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Node {
    Org(OrgNode),
    Unit(UnitNode),
    Asset(AssetNode),
    Comp(CompNode),
    Actor(ActorNode),
    Signal(SignalNode),
}

impl Node {
    pub fn id(&self) -> &NodeId {
        match self {
            Node::Org(n) => &n.id,
            Node::Unit(n) => &n.id,
            Node::Asset(n) => &n.id,
            Node::Comp(n) => &n.id,
            Node::Actor(n) => &n.id,
            Node::Signal(n) => &n.id,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Org(_) => NodeKind::Org,
            Node::Unit(_) => NodeKind::Unit,
            Node::Asset(_) => NodeKind::Asset,
            Node::Comp(_) => NodeKind::Comp,
            Node::Actor(_) => NodeKind::Actor,
            Node::Signal(_) => NodeKind::Signal,
        }
    }

    pub fn display_name(&self) -> &str {
        match self {
            Node::Org(n) => &n.name,
            Node::Unit(n) => &n.name,
            Node::Asset(n) => &n.name,
            Node::Comp(n) => &n.purl,
            Node::Actor(n) => &n.name,
            Node::Signal(n) => &n.external_id,
        }
    }

    pub fn as_asset(&self) -> Option<&AssetNode> {
        match self {
            Node::Asset(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_signal(&self) -> Option<&SignalNode> {
        match self {
            Node::Signal(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_comp(&self) -> Option<&CompNode> {
        match self {
            Node::Comp(c) => Some(c),
            _ => None,
        }
    }

    /// Builds a node of `kind` from a loose attribute map, as received
    /// from the REST API. The map must carry an `id`.
    pub fn from_fields(kind: NodeKind, fields: &Attrs) -> Result<Node, GraphError> {
        let mut map = serde_json::Map::new();
        for (k, v) in fields {
            map.insert(k.clone(), v.clone());
        }
        if kind == NodeKind::Comp {
            // name/version may be derived from the purl
            if let Some(purl) = map.get("purl").and_then(|v| v.as_str()).map(str::to_owned) {
                let parts = crate::purl::Purl::parse(&purl);
                map.entry("name").or_insert_with(|| parts.name.clone().into());
                map.entry("version")
                    .or_insert_with(|| parts.version.clone().unwrap_or_default().into());
            }
        }
        map.insert("kind".into(), format!("{kind:?}").into());
        let node: Node =
            serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| GraphError::InvalidField {
                field: kind.to_string(),
                reason: e.to_string(),
            })?;
        Ok(node)
    }
}
