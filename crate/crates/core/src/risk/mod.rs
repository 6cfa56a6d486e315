//! Contextual risk contribution and its aggregation up the organization.
//!
//! `contrib` is a product of independent factors, so it is monotone in each
//! argument and a zero severity (or a sanitized, zero EPD) annihilates it:
//!
//! ```text
//! contrib = sev/10 * conf * tier_importance * E * D * S * C * G
//!   E = epd if known, else exposure
//!   D = 1.0 direct | 0.8 transitive
//!   S = 1.0 runtime | 0.3 dev | 0.3 test
//!   C = 1.25 critical | 1.0
//!   G = 1.25 ownership gap | 1.0
//! ```

mod export;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, NodeKind, OrgGraph, Scope};

pub use export::{leaderboard_csv, leaderboard_json};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("range violation: {0}")]
    RangeViolation(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub const TRANSITIVE_FACTOR: f64 = 0.8;
pub const NON_RUNTIME_FACTOR: f64 = 0.3;
pub const CRITICAL_FACTOR: f64 = 1.25;
pub const OWNERSHIP_GAP_FACTOR: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContribInputs {
    pub sev: f64,
    pub conf: f64,
    pub direct: bool,
    pub scope: Scope,
    pub exposure: f64,
    pub critical: bool,
    pub ownership_gap: bool,
    pub tier_importance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epd: Option<f64>,
}

impl ContribInputs {
    pub fn validate(&self) -> Result<(), RiskError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(RiskError::RangeViolation(what.to_string()))
            }
        };
        check((0.0..=10.0).contains(&self.sev), "sev must be within [0, 10]")?;
        check((0.0..=1.0).contains(&self.conf), "conf must be within [0, 1]")?;
        check((0.0..=1.0).contains(&self.exposure), "exposure must be within [0, 1]")?;
        check(
            self.tier_importance.is_finite() && self.tier_importance > 0.0,
            "tier_importance must be > 0",
        )?;
        if let Some(epd) = self.epd {
            check((0.0..=1.0).contains(&epd), "epd must be within [0, 1]")?;
        }
        Ok(())
    }
}

pub fn contrib(inputs: &ContribInputs) -> Result<f64, RiskError> {
    inputs.validate()?;
    let exposure = inputs.epd.unwrap_or(inputs.exposure);
    let direct = if inputs.direct { 1.0 } else { TRANSITIVE_FACTOR };
    let scope = match inputs.scope {
        Scope::Runtime => 1.0,
        Scope::Dev | Scope::Test => NON_RUNTIME_FACTOR,
    };
    let critical = if inputs.critical { CRITICAL_FACTOR } else { 1.0 };
    let gap = if inputs.ownership_gap {
        OWNERSHIP_GAP_FACTOR
    } else {
        1.0
    };
    Ok((inputs.sev / 10.0) * inputs.conf * inputs.tier_importance * exposure * direct * scope * critical * gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AggMode {
    #[default]
    Sum,
    Max,
    Mean,
}

impl AggMode {
    /// Aggregate of `values`; an empty set aggregates to 0.0.
    pub fn aggregate(self, values: impl IntoIterator<Item = f64>) -> f64 {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return 0.0;
        }
        match self {
            AggMode::Sum => values.iter().sum(),
            AggMode::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            AggMode::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

impl std::str::FromStr for AggMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(AggMode::Sum),
            "max" => Ok(AggMode::Max),
            "mean" => Ok(AggMode::Mean),
            other => Err(format!("unknown aggregation `{other}` (expected sum, max or mean)")),
        }
    }
}

/// EPD per `(signal, asset)` pair, as produced by slice scoring.
pub type EpdIndex = BTreeMap<(NodeId, NodeId), f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub signal: NodeId,
    pub external_id: String,
    pub org_risk: f64,
    pub asset_count: usize,
    pub unit_count: usize,
    pub gap_count: usize,
}

/// Read-only risk evaluation over a graph snapshot.
#[derive(Debug, Clone)]
pub struct RiskView<'g> {
    graph: &'g OrgGraph,
    epd: EpdIndex,
    tier_overrides: BTreeMap<NodeId, String>,
}

impl<'g> RiskView<'g> {
    pub fn new(graph: &'g OrgGraph) -> Self {
        Self {
            graph,
            epd: EpdIndex::new(),
            tier_overrides: BTreeMap::new(),
        }
    }

    pub fn with_epd(mut self, epd: EpdIndex) -> Self {
        self.epd = epd;
        self
    }

    /// Evaluates as if `asset` were in `tier_id`, without touching the graph.
    pub fn with_tier_override(mut self, asset: NodeId, tier_id: &str) -> Result<Self, RiskError> {
        self.graph.asset(&asset)?;
        if self.graph.tier(tier_id).is_none() {
            return Err(GraphError::UnknownTier(tier_id.to_string()).into());
        }
        self.tier_overrides.insert(asset, tier_id.to_string());
        Ok(self)
    }

    pub fn graph(&self) -> &OrgGraph {
        self.graph
    }

    fn tier_importance(&self, asset: &NodeId) -> Result<f64, RiskError> {
        let a = self.graph.asset(asset)?;
        let tier_id = self.tier_overrides.get(asset).unwrap_or(&a.tier);
        let tier = self
            .graph
            .tier(tier_id)
            .ok_or_else(|| GraphError::UnknownTier(tier_id.clone()))?;
        Ok(tier.importance)
    }

    /// The φ arguments for every dependency path through which `signal`
    /// reaches `asset`; empty when the asset is outside the blast radius.
    pub fn contrib_inputs(&self, signal: &NodeId, asset: &NodeId) -> Result<Vec<ContribInputs>, RiskError> {
        let s = self.graph.signal(signal)?;
        let a = self.graph.asset(asset)?;
        let gap = self.graph.ownership_gap(asset)?;
        let importance = self.tier_importance(asset)?;
        let epd = self.epd.get(&(signal.clone(), asset.clone())).copied();
        Ok(self
            .graph
            .affecting_dependencies(signal, asset)?
            .iter()
            .map(|dep| ContribInputs {
                sev: s.severity,
                conf: s.confidence,
                direct: dep.direct(),
                scope: dep.scope(),
                exposure: a.exposure,
                critical: a.critical,
                ownership_gap: gap,
                tier_importance: importance,
                epd,
            })
            .collect())
    }

    /// Contribution of `signal` at `asset`: the largest over the asset's
    /// affected dependencies, 0.0 outside the blast radius.
    pub fn asset_contrib(&self, signal: &NodeId, asset: &NodeId) -> Result<f64, RiskError> {
        let mut best = 0.0f64;
        for inputs in self.contrib_inputs(signal, asset)? {
            best = best.max(contrib(&inputs)?);
        }
        Ok(best)
    }

    pub fn unit_risk(&self, signal: &NodeId, unit: &NodeId, mode: AggMode) -> Result<f64, RiskError> {
        let owned = self.graph.assets_of(unit)?;
        let affected = self.graph.affected_assets(signal)?;
        let contribs = owned
            .intersection(&affected)
            .map(|a| self.asset_contrib(signal, a))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(mode.aggregate(contribs))
    }

    fn risk_over_units(&self, signal: &NodeId, units: &BTreeSet<NodeId>, mode: AggMode) -> Result<f64, RiskError> {
        self.graph.signal(signal)?;
        let per_unit = units
            .iter()
            .map(|u| self.unit_risk(signal, u, mode))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(mode.aggregate(per_unit))
    }

    /// Aggregate of `unit_risk` over every Unit in the graph.
    pub fn org_risk(&self, signal: &NodeId, mode: AggMode) -> Result<f64, RiskError> {
        let units: BTreeSet<NodeId> = self.graph.nodes_of(NodeKind::Unit).map(|n| n.id().clone()).collect();
        self.risk_over_units(signal, &units, mode)
    }

    /// Aggregate of `unit_risk` over the Units contained by `org`.
    pub fn org_risk_in(&self, signal: &NodeId, org: &NodeId, mode: AggMode) -> Result<f64, RiskError> {
        let units = self.graph.units_of(org)?;
        self.risk_over_units(signal, &units, mode)
    }

    /// Every signal ranked by its risk to `org`: descending risk, then
    /// descending blast-radius size, then ascending external id.
    pub fn leaderboard(&self, org: &NodeId, mode: AggMode) -> Result<Vec<LeaderboardRow>, RiskError> {
        self.graph.expect_kind(org, NodeKind::Org)?;
        let mut rows = Vec::new();
        for node in self.graph.nodes_of(NodeKind::Signal) {
            let s = node.as_signal().expect("kind filtered");
            let metrics = self.graph.governance_metrics(&s.id)?;
            rows.push(LeaderboardRow {
                signal: s.id.clone(),
                external_id: s.external_id.clone(),
                org_risk: self.org_risk_in(&s.id, org, mode)?,
                asset_count: metrics.asset_count,
                unit_count: metrics.unit_count,
                gap_count: metrics.gap_assets.len(),
            });
        }
        rows.sort_by(|a, b| {
            b.org_risk
                .total_cmp(&a.org_risk)
                .then(b.asset_count.cmp(&a.asset_count))
                .then_with(|| a.external_id.cmp(&b.external_id))
        });
        Ok(rows)
    }

    /// Units ranked by their risk under `signal`, highest first; ties by id.
    pub fn unit_leaderboard(&self, signal: &NodeId, mode: AggMode) -> Result<Vec<(NodeId, f64)>, RiskError> {
        self.graph.signal(signal)?;
        let mut rows = self
            .graph
            .nodes_of(NodeKind::Unit)
            .map(|u| Ok((u.id().clone(), self.unit_risk(signal, u.id(), mode)?)))
            .collect::<Result<Vec<_>, RiskError>>()?;
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(rows)
    }

    /// Affected assets ranked by contribution, highest first; ties by id.
    pub fn asset_ranking(&self, signal: &NodeId) -> Result<Vec<(NodeId, f64)>, RiskError> {
        let mut rows = self
            .graph
            .affected_assets(signal)?
            .into_iter()
            .map(|a| {
                let c = self.asset_contrib(signal, &a)?;
                Ok((a, c))
            })
            .collect::<Result<Vec<_>, RiskError>>()?;
        rows.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        });
        Ok(rows)
    }
}
