use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{Attrs, GraphError, NodeId, OrgGraph, TierDef};
use crate::ingest::{DependencyDelta, SbomComponent, Upgrade};
use crate::reachability::DepscoreIndex;

/// The four evaluation contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyContext {
    Status,
    Policy,
    Pr,
    Notification,
}

impl PolicyContext {
    pub const ALL: [PolicyContext; 4] = [Self::Status, Self::Policy, Self::Pr, Self::Notification];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Status => "status",
            Self::Policy => "policy",
            Self::Pr => "pr",
            Self::Notification => "notification",
        }
    }

    /// Actions a script in this context may call.
    pub fn actions(self) -> &'static [&'static str] {
        match self {
            Self::Status => &["transition"],
            Self::Policy => &["violation"],
            Self::Pr => &["allow", "block"],
            Self::Notification => &["dispatch"],
        }
    }
}

impl fmt::Display for PolicyContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyContext {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown policy context `{s}`"))
    }
}

/// Asset fields exposed to scripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetView {
    pub id: String,
    pub name: String,
    pub tier: String,
    pub compliance_status: String,
    pub exposure: f64,
    pub critical: bool,
    #[serde(default)]
    pub ownership_gap: bool,
    #[serde(default)]
    pub attrs: Attrs,
}

impl AssetView {
    pub fn from_graph(graph: &OrgGraph, asset: &NodeId) -> Result<Self, GraphError> {
        let a = graph.asset(asset)?;
        Ok(Self {
            id: a.id.to_string(),
            name: a.name.clone(),
            tier: a.tier.clone(),
            compliance_status: a.compliance_status.clone(),
            exposure: a.exposure,
            critical: a.critical,
            ownership_gap: graph.ownership_gap(asset)?,
            attrs: a.attrs.clone(),
        })
    }
}

/// Aggregate risk facts about one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RiskSummary {
    /// Signals reaching the asset through its dependencies.
    pub signal_count: usize,
    pub max_severity: f64,
    /// Highest scored depscore among those signals, if any were scored.
    pub max_depscore: Option<u32>,
    /// Distinct ownership-gap assets across the blast radii of those signals.
    pub gap_assets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusBinding {
    pub asset: AssetView,
    pub tier: TierDef,
    pub attrs: Attrs,
    pub current_status: String,
    pub risk_summary: RiskSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMeta {
    pub id: String,
    pub purl: String,
    pub name: String,
    pub version: String,
    pub licenses: Vec<String>,
    pub maintainer_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBinding {
    pub component: ComponentMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DeltaView {
    pub added: Vec<SbomComponent>,
    pub removed: Vec<SbomComponent>,
    pub upgraded: Vec<Upgrade>,
    pub added_licenses: Vec<String>,
}

impl From<&DependencyDelta> for DeltaView {
    fn from(d: &DependencyDelta) -> Self {
        Self {
            added: d.added.clone(),
            removed: d.removed.clone(),
            upgraded: d.upgraded.clone(),
            added_licenses: d.added_licenses(),
        }
    }
}

/// Pull-request metadata passed through from CI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PrMeta {
    #[serde(default)]
    pub repo: String,
    #[serde(default)]
    pub number: u64,
    #[serde(default)]
    pub author: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrBinding {
    pub asset: AssetView,
    pub tier: TierDef,
    pub delta: DeltaView,
    #[serde(default)]
    pub pr: PrMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalView {
    pub id: String,
    pub external_id: String,
    pub severity: f64,
    pub confidence: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlastView {
    pub asset_count: usize,
    pub unit_count: usize,
    pub gap_assets: usize,
    #[serde(default)]
    pub gap_asset_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotifiedAsset {
    pub id: String,
    pub name: String,
    pub tier: TierDef,
    pub depscore: Option<u32>,
    pub critical: bool,
    pub exposure: f64,
    #[serde(default)]
    pub ownership_gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationBinding {
    pub signal: SignalView,
    pub blast: BlastView,
    pub assets: Vec<NotifiedAsset>,
}

/// Read-only input record of an evaluation, one variant per context.
/// Each top-level field becomes a global of the script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "context", rename_all = "snake_case")]
pub enum ContextBinding {
    Status(StatusBinding),
    Policy(PolicyBinding),
    Pr(PrBinding),
    Notification(NotificationBinding),
}

fn tier_of(graph: &OrgGraph, tier_id: &str) -> Result<TierDef, GraphError> {
    graph
        .tier(tier_id)
        .cloned()
        .ok_or_else(|| GraphError::UnknownTier(tier_id.to_string()))
}

impl ContextBinding {
    pub fn context(&self) -> PolicyContext {
        match self {
            Self::Status(_) => PolicyContext::Status,
            Self::Policy(_) => PolicyContext::Policy,
            Self::Pr(_) => PolicyContext::Pr,
            Self::Notification(_) => PolicyContext::Notification,
        }
    }

    /// Top-level fields as a JSON object, without the context tag.
    pub fn globals(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut map = match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => serde_json::Map::new(),
        };
        map.remove("context");
        map
    }

    pub fn status(graph: &OrgGraph, asset: &NodeId, depscores: &DepscoreIndex) -> Result<Self, GraphError> {
        let view = AssetView::from_graph(graph, asset)?;
        let signals = graph.signals_affecting(asset)?;
        let mut summary = RiskSummary {
            signal_count: signals.len(),
            ..RiskSummary::default()
        };
        let mut gaps = BTreeSet::new();
        for s in &signals {
            summary.max_severity = summary.max_severity.max(graph.signal(s)?.severity);
            if let Some(r) = depscores.get(&(s.clone(), asset.clone())) {
                summary.max_depscore = Some(summary.max_depscore.unwrap_or(0).max(r.depscore));
            }
            gaps.extend(graph.governance_metrics(s)?.gap_assets);
        }
        summary.gap_assets = gaps.len();
        Ok(Self::Status(StatusBinding {
            tier: tier_of(graph, &view.tier)?,
            attrs: view.attrs.clone(),
            current_status: view.compliance_status.clone(),
            asset: view,
            risk_summary: summary,
        }))
    }

    pub fn policy(graph: &OrgGraph, comp: &NodeId) -> Result<Self, GraphError> {
        let c = graph.comp(comp)?;
        Ok(Self::Policy(PolicyBinding {
            component: ComponentMeta {
                id: c.id.to_string(),
                purl: c.purl.clone(),
                name: c.name.clone(),
                version: c.version.clone(),
                licenses: c.licenses.clone(),
                maintainer_count: graph.maintainer_count(comp),
            },
        }))
    }

    pub fn pr(graph: &OrgGraph, asset: &NodeId, delta: &DependencyDelta, meta: PrMeta) -> Result<Self, GraphError> {
        let view = AssetView::from_graph(graph, asset)?;
        Ok(Self::Pr(PrBinding {
            tier: tier_of(graph, &view.tier)?,
            asset: view,
            delta: delta.into(),
            pr: meta,
        }))
    }

    pub fn notification(graph: &OrgGraph, signal: &NodeId, depscores: &DepscoreIndex) -> Result<Self, GraphError> {
        let s = graph.signal(signal)?;
        let metrics = graph.governance_metrics(signal)?;
        let mut assets = Vec::new();
        for id in graph.affected_assets(signal)? {
            let a = graph.asset(&id)?;
            assets.push(NotifiedAsset {
                id: id.to_string(),
                name: a.name.clone(),
                tier: tier_of(graph, &a.tier)?,
                depscore: depscores.get(&(signal.clone(), id.clone())).map(|r| r.depscore),
                critical: a.critical,
                exposure: a.exposure,
                ownership_gap: metrics.gap_assets.contains(&id),
            });
        }
        Ok(Self::Notification(NotificationBinding {
            signal: SignalView {
                id: s.id.to_string(),
                external_id: s.external_id.clone(),
                severity: s.severity,
                confidence: s.confidence,
                description: s.description.clone(),
            },
            blast: BlastView {
                asset_count: metrics.asset_count,
                unit_count: metrics.unit_count,
                gap_assets: metrics.gap_assets.len(),
                gap_asset_ids: metrics.gap_assets.iter().map(|g| g.to_string()).collect(),
            },
            assets,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Allow,
    Block,
}

/// One webhook delivery requested by a notification script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub channel_id: String,
    pub payload: serde_json::Value,
}

/// Result of an evaluation, one variant per context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "context", rename_all = "snake_case")]
pub enum PolicyOutcome {
    Status { transition_to: Option<String> },
    Policy { pass: bool, violations: Vec<String> },
    Pr { decision: Decision, comment: String },
    Notification { dispatches: Vec<Dispatch> },
}

impl PolicyOutcome {
    pub fn context(&self) -> PolicyContext {
        match self {
            Self::Status { .. } => PolicyContext::Status,
            Self::Policy { .. } => PolicyContext::Policy,
            Self::Pr { .. } => PolicyContext::Pr,
            Self::Notification { .. } => PolicyContext::Notification,
        }
    }

    /// No transition, a pass, or no dispatches. A pr outcome is never neutral.
    pub fn is_neutral(&self) -> bool {
        match self {
            Self::Status { transition_to } => transition_to.is_none(),
            Self::Policy { violations, .. } => violations.is_empty(),
            Self::Pr { .. } => false,
            Self::Notification { dispatches } => dispatches.is_empty(),
        }
    }
}
