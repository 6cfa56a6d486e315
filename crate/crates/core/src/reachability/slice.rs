use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::ReachError;
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    PublicHttp,
    AuthenticatedHttp,
    InternalRpc,
    Cli,
    BackgroundJob,
}

impl EntryKind {
    pub const ALL: [EntryKind; 5] = [
        EntryKind::PublicHttp,
        EntryKind::AuthenticatedHttp,
        EntryKind::InternalRpc,
        EntryKind::Cli,
        EntryKind::BackgroundJob,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceFunction {
    pub fn_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_kind: Option<EntryKind>,
    #[serde(default)]
    pub sanitizer: bool,
    #[serde(default)]
    pub snippet: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Call,
    Dataflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceEdge {
    pub from: String,
    pub to: String,
    pub kind: FlowKind,
}

/// A code-property-graph slice from an asset's entry points to the
/// vulnerable sink of one signal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceReport {
    pub asset_ref: NodeId,
    pub signal_ref: NodeId,
    pub functions: Vec<SliceFunction>,
    #[serde(default)]
    pub edges: Vec<SliceEdge>,
    pub entry_points: Vec<String>,
    pub sink: String,
}

impl SliceReport {
    pub fn from_json(bytes: &[u8]) -> Result<SliceReport, ReachError> {
        let slice: SliceReport =
            serde_json::from_slice(bytes).map_err(|e| ReachError::MalformedSlice(e.to_string()))?;
        slice.validate()?;
        Ok(slice)
    }

    pub fn validate(&self) -> Result<(), ReachError> {
        let mut ids = BTreeSet::new();
        for f in &self.functions {
            if !ids.insert(f.fn_id.as_str()) {
                return Err(ReachError::MalformedSlice(format!("duplicate fn_id {}", f.fn_id)));
            }
        }
        if self.entry_points.is_empty() {
            return Err(ReachError::MalformedSlice("entry_points must be non-empty".into()));
        }
        if !ids.contains(self.sink.as_str()) {
            return Err(ReachError::MalformedSlice(format!(
                "sink {} is not a declared function",
                self.sink
            )));
        }
        for e in &self.entry_points {
            if !ids.contains(e.as_str()) {
                return Err(ReachError::MalformedSlice(format!(
                    "entry point {e} is not a declared function"
                )));
            }
        }
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    return Err(ReachError::MalformedSlice(format!(
                        "edge references undeclared function {end}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn function(&self, fn_id: &str) -> Option<&SliceFunction> {
        self.functions.iter().find(|f| f.fn_id == fn_id)
    }

    pub(crate) fn check_entry(&self, entry: &str) -> Result<(), ReachError> {
        if self.entry_points.iter().any(|e| e == entry) {
            Ok(())
        } else {
            Err(ReachError::UnknownEntry(entry.to_string()))
        }
    }

    fn adjacency(&self, reverse: bool) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            let (a, b) = if reverse { (&e.to, &e.from) } else { (&e.from, &e.to) };
            adj.entry(a.as_str()).or_default().push(b.as_str());
        }
        adj
    }

    fn bfs<'a>(adj: &BTreeMap<&'a str, Vec<&'a str>>, start: &'a str) -> BTreeMap<&'a str, u32> {
        let mut dist = BTreeMap::from([(start, 0u32)]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            for &v in adj.get(u).map(Vec::as_slice).unwrap_or_default() {
                if !dist.contains_key(v) {
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Hop count of the shortest directed path `entry -> sink` over call and
    /// dataflow edges alike; `None` when the sink is unreachable.
    pub fn path_depth(&self, entry: &str) -> Result<Option<u32>, ReachError> {
        self.check_entry(entry)?;
        let adj = self.adjacency(false);
        Ok(Self::bfs(&adj, entry).get(self.sink.as_str()).copied())
    }

    /// True iff every shortest `entry -> sink` path visits at least one
    /// sanitizer function (endpoints included). False when unreachable.
    pub fn shortest_paths_sanitized(&self, entry: &str) -> Result<bool, ReachError> {
        self.check_entry(entry)?;
        let forward = Self::bfs(&self.adjacency(false), entry);
        let Some(&total) = forward.get(self.sink.as_str()) else {
            return Ok(false);
        };
        let backward = Self::bfs(&self.adjacency(true), self.sink.as_str());
        let sanitizer: BTreeSet<&str> = self
            .functions
            .iter()
            .filter(|f| f.sanitizer)
            .map(|f| f.fn_id.as_str())
            .collect();
        let on_shortest = |v: &str| match (forward.get(v), backward.get(v)) {
            (Some(a), Some(b)) => a + b == total,
            _ => false,
        };
        if sanitizer.contains(entry) {
            return Ok(true);
        }
        // Search for a sanitizer-free path inside the shortest-path DAG.
        let adj = self.adjacency(false);
        let mut seen = BTreeSet::from([entry]);
        let mut stack = vec![entry];
        while let Some(u) = stack.pop() {
            if u == self.sink {
                return Ok(false);
            }
            for &v in adj.get(u).map(Vec::as_slice).unwrap_or_default() {
                let advances = forward.get(v) == Some(&(forward[u] + 1));
                if advances && on_shortest(v) && !sanitizer.contains(v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        Ok(true)
    }
}
