use serde::{Deserialize, Serialize};

use super::{Edge, GraphError, Node, OrgGraph, StatusDef, TierDef, DEFAULT_STATUS, DEFAULT_TIER};

/// Serialized form of an [`OrgGraph`]. Nodes, edges and definitions are
/// emitted in id order so equal graphs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub tiers: Vec<TierDef>,
    pub statuses: Vec<StatusDef>,
}

impl OrgGraph {
    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges().collect(),
            tiers: self.tiers.values().cloned().collect(),
            statuses: self.statuses.values().cloned().collect(),
        }
    }

    /// Rebuilds a graph, re-validating every definition, node and edge.
    /// Any failure is reported as [`GraphError::CorruptSnapshot`].
    pub fn from_snapshot(snapshot: GraphSnapshot) -> Result<OrgGraph, GraphError> {
        let corrupt = |what: &str, e: GraphError| GraphError::CorruptSnapshot(format!("{what}: {e}"));
        let mut graph = OrgGraph::new();
        for tier in snapshot.tiers {
            if tier.tier_id == DEFAULT_TIER {
                graph.update_tier(tier).map_err(|e| corrupt("tier", e))?;
            } else {
                graph.add_tier(tier).map_err(|e| corrupt("tier", e))?;
            }
        }
        for status in snapshot.statuses {
            if status.status_id == DEFAULT_STATUS {
                graph.statuses.insert(status.status_id.clone(), status);
            } else {
                graph.add_status(status).map_err(|e| corrupt("status", e))?;
            }
        }
        for node in snapshot.nodes {
            graph.add_node(node).map_err(|e| corrupt("node", e))?;
        }
        for edge in snapshot.edges {
            graph.add_edge(edge).map_err(|e| corrupt("edge", e))?;
        }
        Ok(graph)
    }
}
