//! Operations over the store, shared by the REST API and the CLI.
//!
//! Every mutation runs against a copy of the state; the copy replaces the
//! live state only after the snapshot has been written, so a failed write
//! leaves both the file and memory unchanged.

use std::collections::BTreeSet;
use std::sync::Arc;

use deptex_core::graph::{Attrs, Edge, EdgeKind, Node, NodeId, NodeKind, StatusDef, TierDef};
use deptex_core::ingest::{apply_sbom, match_vulnerabilities, parse_sbom, parse_vuln_feed, ApplyReport, SignalMatch};
use deptex_core::policy::{
    dry_run, evaluate, run_status_policies, ContextBinding, Dispatch, DryRunReport, PolicyContext, PolicyOutcome,
    PolicyScript, SandboxBudget, StatusRun,
};
use deptex_core::reachability::{depscore, DepscoreResult, ExternalVerifier, RuleBasedVerifier, SliceReport};
use deptex_core::risk::{leaderboard_csv, leaderboard_json, AggMode, LeaderboardRow, RiskView};
use deptex_core::transport::HttpTransport;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::audit::AuditRecord;
use crate::channel::ChannelDef;
use crate::config::ServiceConfig;
use crate::dispatch::{resolve, DeliveryReport};
use crate::error::ServiceError;
use crate::gate::{gate_pr, GateRequest, GateResult};
use crate::store::{Store, StoreState};

/// Body of `POST /policies`. The context defaults to the source's
/// `#context:` header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewPolicy {
    pub policy_id: String,
    pub source: String,
    #[serde(default)]
    pub context: Option<PolicyContext>,
    #[serde(default)]
    pub budget: Option<SandboxBudget>,
}

/// Body of `POST /policies/{id}/dry-run`. Either an explicit binding
/// fixture or the id of a stored subject (asset for status, component for
/// policy, signal for notification) to build one from. `source` replaces
/// the stored source for this run only.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DryRunRequest {
    #[serde(default)]
    pub binding: Option<ContextBinding>,
    #[serde(default)]
    pub subject: Option<NodeId>,
    #[serde(default)]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlastRadius {
    pub signal: NodeId,
    pub external_id: String,
    pub affected_components: Vec<NodeId>,
    pub affected_assets: Vec<NodeId>,
    pub affected_units: Vec<NodeId>,
    pub asset_count: usize,
    pub unit_count: usize,
    pub gap_assets: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetDepscore {
    pub signal: NodeId,
    pub external_id: String,
    #[serde(flatten)]
    pub result: DepscoreResult,
}

/// Dispatches requested by one notification policy for one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationRun {
    pub signal: NodeId,
    pub policy_id: String,
    pub dispatches: Vec<Dispatch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedReport {
    pub matched: Vec<SignalMatch>,
    pub notifications: Vec<NotificationRun>,
}

impl FeedReport {
    pub fn dispatches(&self) -> Vec<Dispatch> {
        self.notifications
            .iter()
            .flat_map(|n| n.dispatches.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LeaderboardFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for LeaderboardFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown format `{other}` (expected json or csv)")),
        }
    }
}

/// Exact bytes returned by the leaderboard endpoint and printed by
/// `deptex score`.
pub fn render_leaderboard(rows: &[LeaderboardRow], format: LeaderboardFormat) -> String {
    match format {
        LeaderboardFormat::Json => leaderboard_json(rows) + "\n",
        LeaderboardFormat::Csv => leaderboard_csv(rows),
    }
}

/// Parses `asset:tier[,asset:tier...]`.
pub fn parse_tier_overrides(raw: &str) -> Result<Vec<(NodeId, String)>, ServiceError> {
    raw.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (asset, tier) = pair
                .trim()
                .rsplit_once(':')
                .filter(|(a, t)| !a.is_empty() && !t.is_empty())
                .ok_or_else(|| ServiceError::Validation(format!("override `{pair}` is not asset:tier")))?;
            let asset = NodeId::new(asset).map_err(ServiceError::from)?;
            Ok((asset, tier.to_string()))
        })
        .collect()
}

pub struct Service {
    store: Store,
    config: ServiceConfig,
    transport: Arc<dyn HttpTransport>,
    actor: String,
}

impl Service {
    pub fn new(store: Store, config: ServiceConfig, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            store,
            config,
            transport,
            actor: "api".into(),
        }
    }

    /// Name recorded as the actor of audit entries.
    pub fn with_actor(mut self, actor: &str) -> Self {
        self.actor = actor.into();
        self
    }

    pub fn state(&self) -> &StoreState {
        &self.store.state
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn transport(&self) -> Arc<dyn HttpTransport> {
        self.transport.clone()
    }

    pub fn into_store(self) -> Store {
        self.store
    }

    fn audit(&self, action: &str, subject: impl Into<String>, detail: serde_json::Value) -> AuditRecord {
        AuditRecord::now(&self.actor, action, subject, detail)
    }

    /// Runs `f` on a copy of the state, persists it, then swaps it in.
    fn mutate<T>(
        &mut self,
        f: impl FnOnce(&mut StoreState, &Self) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut next = self.store.state.clone();
        let out = f(&mut next, self)?;
        let previous = std::mem::replace(&mut self.store.state, next);
        if let Err(e) = self.store.persist() {
            self.store.state = previous;
            return Err(e.into());
        }
        Ok(out)
    }

    // ---- definitions and topology ----------------------------------

    /// Creates a node from loose fields. `parent` must be an Org for a
    /// Unit (adds `contains`) or a Unit for an Asset (adds `owns`). A
    /// missing `id` is generated.
    pub fn create_node(
        &mut self,
        kind: NodeKind,
        mut fields: Attrs,
        parent: Option<NodeId>,
    ) -> Result<Node, ServiceError> {
        self.mutate(|st, svc| {
            let edge_kind = match (kind, &parent) {
                (_, None) => None,
                (NodeKind::Unit, Some(p)) => {
                    st.graph.expect_kind(p, NodeKind::Org)?;
                    Some(EdgeKind::Contains)
                }
                (NodeKind::Asset, Some(p)) => {
                    st.graph.expect_kind(p, NodeKind::Unit)?;
                    Some(EdgeKind::Owns)
                }
                (k, Some(_)) => return Err(ServiceError::Validation(format!("a {k} takes no parent"))),
            };
            if !fields.contains_key("id") {
                fields.insert("id".into(), st.graph.fresh_id(kind).to_string().into());
            }
            let node = Node::from_fields(kind, &fields)?;
            if let Node::Asset(a) = &node {
                if st.graph.tier(&a.tier).is_none() {
                    return Err(deptex_core::GraphError::UnknownTier(a.tier.clone()).into());
                }
                if st.graph.status(&a.compliance_status).is_none() {
                    return Err(deptex_core::GraphError::UnknownStatus(a.compliance_status.clone()).into());
                }
            }
            let id = st.graph.add_node(node.clone())?;
            if let (Some(p), Some(k)) = (parent, edge_kind) {
                st.graph.add_edge(Edge::new(p, id.clone(), k))?;
            }
            st.audit
                .push(svc.audit("create", id.as_str(), json!({"kind": kind.to_string()})));
            Ok(node)
        })
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<Edge, ServiceError> {
        self.mutate(|st, svc| {
            st.graph.add_edge(edge.clone())?;
            st.audit.push(svc.audit(
                "add_edge",
                format!("{} -{}-> {}", edge.src, edge.kind, edge.dst),
                json!({}),
            ));
            Ok(edge)
        })
    }

    pub fn add_tier(&mut self, tier: TierDef) -> Result<TierDef, ServiceError> {
        self.mutate(|st, svc| {
            st.graph.add_tier(tier.clone())?;
            st.audit
                .push(svc.audit("create_tier", &tier.tier_id, json!({"importance": tier.importance})));
            Ok(tier)
        })
    }

    pub fn update_tier(&mut self, tier: TierDef) -> Result<TierDef, ServiceError> {
        self.mutate(|st, svc| {
            st.graph.update_tier(tier.clone())?;
            st.audit
                .push(svc.audit("update_tier", &tier.tier_id, json!({"importance": tier.importance})));
            Ok(tier)
        })
    }

    pub fn set_asset_tier(&mut self, asset: &NodeId, tier_id: &str) -> Result<(), ServiceError> {
        self.mutate(|st, svc| {
            let from = st.graph.asset(asset)?.tier.clone();
            st.graph.set_tier(asset, tier_id)?;
            st.audit
                .push(svc.audit("set_tier", asset.as_str(), json!({"from": from, "to": tier_id})));
            Ok(())
        })
    }

    pub fn add_status(&mut self, status: StatusDef) -> Result<StatusDef, ServiceError> {
        self.mutate(|st, svc| {
            st.graph.add_status(status.clone())?;
            st.audit.push(svc.audit("create_status", &status.status_id, json!({})));
            Ok(status)
        })
    }

    pub fn add_channel(&mut self, channel: ChannelDef) -> Result<ChannelDef, ServiceError> {
        channel.validate().map_err(ServiceError::Validation)?;
        self.mutate(|st, svc| {
            if st.channels.contains_key(&channel.channel_id) {
                return Err(ServiceError::Conflict(format!(
                    "duplicate channel `{}`",
                    channel.channel_id
                )));
            }
            st.channels.insert(channel.channel_id.clone(), channel.clone());
            st.audit.push(svc.audit(
                "create_channel",
                &channel.channel_id,
                json!({"endpoint": channel.endpoint}),
            ));
            Ok(channel)
        })
    }

    pub fn add_policy(&mut self, req: NewPolicy) -> Result<PolicyScript, ServiceError> {
        let script = match req.context {
            Some(context) => PolicyScript::new(req.policy_id.clone(), context, req.source)?,
            None => PolicyScript::from_source(req.policy_id.clone(), req.source)?,
        };
        let script = match req.budget {
            Some(b) => script.with_budget(b)?,
            None => script,
        };
        self.mutate(|st, svc| {
            if st.policies.contains_key(&script.policy_id) {
                return Err(ServiceError::Conflict(format!(
                    "duplicate policy `{}`",
                    script.policy_id
                )));
            }
            st.policies.insert(script.policy_id.clone(), script.clone());
            st.audit.push(svc.audit(
                "create_policy",
                &script.policy_id,
                json!({"context": script.context.as_str()}),
            ));
            Ok(script)
        })
    }

    // ---- ingestion ---------------------------------------------------

    /// Mirrors a CycloneDX SBOM onto the asset's dependencies, then runs
    /// status policies for the asset.
    pub fn ingest_sbom(&mut self, asset: &NodeId, bytes: &[u8]) -> Result<ApplyReport, ServiceError> {
        let doc = parse_sbom(bytes)?;
        self.mutate(|st, svc| {
            let report = apply_sbom(&mut st.graph, &doc, asset)?;
            st.prune_depscores();
            st.audit.push(svc.audit(
                "ingest_sbom",
                asset.as_str(),
                json!({"added": report.added, "removed": report.removed, "components": doc.components.len()}),
            ));
            svc.run_status(st, std::slice::from_ref(asset));
            Ok(report)
        })
    }

    /// Matches a vulnerability feed against stored components, then runs
    /// status policies for every affected asset and notification policies
    /// for every matched signal. Delivery of the resulting dispatches is
    /// up to the caller.
    pub fn ingest_feed(&mut self, bytes: &[u8]) -> Result<FeedReport, ServiceError> {
        let entries = parse_vuln_feed(bytes)?;
        self.mutate(|st, svc| {
            let matched = match_vulnerabilities(&mut st.graph, &entries)?;
            st.audit.push(svc.audit(
                "ingest_feed",
                format!("{} entries", entries.len()),
                json!({"matched": matched.iter().map(|m| m.signal.external_id.clone()).collect::<Vec<_>>()}),
            ));
            let mut assets = BTreeSet::new();
            for m in &matched {
                assets.extend(st.graph.affected_assets(&m.signal.id)?);
            }
            svc.run_status(st, &assets.into_iter().collect::<Vec<_>>());
            let mut notifications = Vec::new();
            for m in &matched {
                notifications.extend(svc.plan_notifications(st, &m.signal.id)?);
            }
            Ok(FeedReport { matched, notifications })
        })
    }

    /// Scores a slice and stores the depscore for its (signal, asset).
    /// `signal_ref` may be a signal node id or its external id.
    pub fn ingest_slice(&mut self, bytes: &[u8]) -> Result<DepscoreResult, ServiceError> {
        let mut slice = SliceReport::from_json(bytes)?;
        self.mutate(|st, svc| {
            st.graph.asset(&slice.asset_ref)?;
            slice.signal_ref = svc.resolve_signal(st, &slice.signal_ref)?;
            let signal = st.graph.signal(&slice.signal_ref)?.clone();
            if !st.graph.affected_assets(&signal.id)?.contains(&slice.asset_ref) {
                return Err(ServiceError::Unprocessable(format!(
                    "asset {} is outside the blast radius of {}",
                    slice.asset_ref, signal.id
                )));
            }
            let result = match &svc.config.verifier_url {
                Some(url) => depscore(
                    &signal,
                    &slice,
                    &svc.config.epd,
                    &ExternalVerifier::new(url, svc.transport.clone()),
                )?,
                None => depscore(&signal, &slice, &svc.config.epd, &RuleBasedVerifier)?,
            };
            st.depscores
                .insert((signal.id.clone(), slice.asset_ref.clone()), result.clone());
            st.audit.push(svc.audit(
                "ingest_slice",
                format!("{}/{}", signal.id, slice.asset_ref),
                json!({"depscore": result.depscore, "epd": result.epd, "entry_point": result.entry_point}),
            ));
            svc.run_status(st, &[slice.asset_ref.clone()]);
            Ok(result)
        })
    }

    fn resolve_signal(&self, st: &StoreState, reference: &NodeId) -> Result<NodeId, ServiceError> {
        if st.graph.contains(reference) {
            return Ok(reference.clone());
        }
        st.graph
            .nodes_of(NodeKind::Signal)
            .filter_map(Node::as_signal)
            .find(|s| s.external_id == reference.as_str())
            .map(|s| s.id.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("signal `{reference}` not found")))
    }

    /// Status policies for each asset; outcomes go to the audit log.
    fn run_status(&self, st: &mut StoreState, assets: &[NodeId]) {
        let policies: Vec<PolicyScript> = st
            .policies
            .values()
            .filter(|p| p.context == PolicyContext::Status)
            .cloned()
            .collect();
        if policies.is_empty() {
            return;
        }
        for asset in assets {
            let run = run_status_policies(&mut st.graph, &policies, asset, &st.depscores, self.transport.as_ref());
            let detail = match &run {
                Ok(StatusRun { applied, evaluations }) => json!({
                    "applied": applied,
                    "errors": evaluations.iter().filter_map(|e| e.error.as_ref().map(|err| (e.policy_id.clone(), err.to_string()))).collect::<Vec<_>>(),
                }),
                Err(e) => json!({"error": e.to_string()}),
            };
            st.audit.push(self.audit("status_policies", asset.as_str(), detail));
        }
    }

    fn plan_notifications(&self, st: &mut StoreState, signal: &NodeId) -> Result<Vec<NotificationRun>, ServiceError> {
        let binding = ContextBinding::notification(&st.graph, signal, &st.depscores)?;
        let mut runs = Vec::new();
        for p in st
            .policies
            .values()
            .filter(|p| p.context == PolicyContext::Notification)
        {
            let (dispatches, error) = match evaluate(p, &binding, &p.budget, self.transport.as_ref()) {
                Ok(PolicyOutcome::Notification { dispatches }) => match resolve(&dispatches, &st.channels) {
                    Ok(_) => (dispatches, None),
                    Err(e) => (Vec::new(), Some(e.to_string())),
                },
                Ok(other) => unreachable!("notification script produced a {} outcome", other.context()),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            runs.push(NotificationRun {
                signal: signal.clone(),
                policy_id: p.policy_id.clone(),
                dispatches,
                error,
            });
        }
        st.audit.push(self.audit(
            "notification_policies",
            signal.as_str(),
            serde_json::to_value(&runs).unwrap_or_default(),
        ));
        Ok(runs)
    }

    /// Re-evaluates notification policies for one signal, e.g. after new
    /// slices changed its depscores.
    pub fn notify(&mut self, signal: &NodeId) -> Result<Vec<NotificationRun>, ServiceError> {
        self.mutate(|st, svc| {
            let id = svc.resolve_signal(st, signal)?;
            svc.plan_notifications(st, &id)
        })
    }

    pub fn record_delivery(&mut self, report: &DeliveryReport) -> Result<(), ServiceError> {
        self.mutate(|st, svc| {
            for d in &report.deliveries {
                st.audit
                    .push(svc.audit("deliver", &d.channel_id, serde_json::to_value(d).unwrap_or_default()));
            }
            Ok(())
        })
    }

    // ---- queries ---------------------------------------------------

    pub fn blast_radius(&self, signal: &NodeId) -> Result<BlastRadius, ServiceError> {
        let st = &self.store.state;
        let id = self.resolve_signal(st, signal)?;
        let g = &st.graph;
        let s = g.signal(&id)?;
        let metrics = g.governance_metrics(&id)?;
        Ok(BlastRadius {
            signal: id.clone(),
            external_id: s.external_id.clone(),
            affected_components: g.affected_components(&id)?.into_iter().collect(),
            affected_assets: g.affected_assets(&id)?.into_iter().collect(),
            affected_units: g.affected_units(&id)?.into_iter().collect(),
            asset_count: metrics.asset_count,
            unit_count: metrics.unit_count,
            gap_assets: metrics.gap_assets.into_iter().collect(),
        })
    }

    /// Signals ranked by risk to `org`. Overrides are hypothetical and
    /// never stored.
    pub fn leaderboard(
        &self,
        org: &NodeId,
        mode: AggMode,
        overrides: &[(NodeId, String)],
    ) -> Result<Vec<LeaderboardRow>, ServiceError> {
        let st = &self.store.state;
        let mut view = RiskView::new(&st.graph).with_epd(st.epd_index());
        for (asset, tier) in overrides {
            view = view.with_tier_override(asset.clone(), tier)?;
        }
        Ok(view.leaderboard(org, mode)?)
    }

    pub fn depscores(&self, asset: &NodeId) -> Result<Vec<AssetDepscore>, ServiceError> {
        let st = &self.store.state;
        st.graph.asset(asset)?;
        st.depscores
            .iter()
            .filter(|((_, a), _)| a == asset)
            .map(|((s, _), r)| {
                Ok(AssetDepscore {
                    signal: s.clone(),
                    external_id: st.graph.signal(s)?.external_id.clone(),
                    result: r.clone(),
                })
            })
            .collect()
    }

    pub fn audit_log(&self) -> &[AuditRecord] {
        &self.store.state.audit
    }

    // ---- policy evaluation -----------------------------------------

    /// Runs the PR gate and audits every evaluation. The graph is not
    /// touched.
    pub fn gate(&mut self, req: &GateRequest) -> Result<GateResult, ServiceError> {
        let result = gate_pr(
            &self.store.state.graph,
            self.store.state.policies.values(),
            req,
            self.transport.as_ref(),
        )?;
        let subject = if req.pr_meta.repo.is_empty() {
            req.asset_ref.to_string()
        } else {
            format!("{}#{}", req.pr_meta.repo, req.pr_meta.number)
        };
        self.mutate(|st, svc| {
            st.audit.push(svc.audit(
                "gate_pr",
                subject,
                json!({
                    "asset": req.asset_ref,
                    "decision": result.decision,
                    "evaluations": result.evaluations,
                }),
            ));
            Ok(())
        })?;
        Ok(result)
    }

    /// Evaluates a stored (or overridden) policy with tracing. Read-only.
    pub fn dry_run(&self, policy_id: &str, req: DryRunRequest) -> Result<DryRunReport, ServiceError> {
        let st = &self.store.state;
        let stored = st.policies.get(policy_id);
        let script = match (req.source, stored) {
            (Some(source), Some(p)) => {
                PolicyScript::new(policy_id, p.context, source)?.with_budget(p.budget.clone())?
            }
            (Some(source), None) => PolicyScript::from_source(policy_id, source)?,
            (None, Some(p)) => p.clone(),
            (None, None) => return Err(ServiceError::NotFound(format!("policy `{policy_id}` not found"))),
        };
        let binding = match (req.binding, req.subject) {
            (Some(b), _) => b,
            (None, Some(subject)) => match script.context {
                PolicyContext::Status => ContextBinding::status(&st.graph, &subject, &st.depscores)?,
                PolicyContext::Policy => ContextBinding::policy(&st.graph, &subject)?,
                PolicyContext::Notification => {
                    let id = self.resolve_signal(st, &subject)?;
                    ContextBinding::notification(&st.graph, &id, &st.depscores)?
                }
                PolicyContext::Pr => {
                    return Err(ServiceError::Validation(
                        "pr dry runs need an explicit binding (the delta is not stored)".into(),
                    ))
                }
            },
            (None, None) => return Err(ServiceError::Validation("dry run needs `binding` or `subject`".into())),
        };
        Ok(dry_run(&script, &binding, &script.budget, self.transport.as_ref()))
    }
}
