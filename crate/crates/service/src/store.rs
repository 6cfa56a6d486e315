//! The service's whole state and its JSON snapshot file.
//!
//! A snapshot is written to a temporary file in the target directory,
//! flushed to disk and renamed over the old one, so the file on disk is
//! always one complete state. Loading re-validates every graph invariant,
//! re-parses every policy and checks cross references.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use deptex_core::graph::{GraphSnapshot, NodeId, NodeKind, OrgGraph};
use deptex_core::policy::PolicyScript;
use deptex_core::reachability::{DepscoreIndex, DepscoreResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::AuditRecord;
use crate::channel::ChannelDef;

pub const SNAPSHOT_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StoreState {
    pub graph: OrgGraph,
    pub policies: BTreeMap<String, PolicyScript>,
    pub channels: BTreeMap<String, ChannelDef>,
    /// Depscore per `(signal, asset)`, from ingested slices.
    pub depscores: DepscoreIndex,
    pub audit: Vec<AuditRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DepscoreEntry {
    signal: NodeId,
    asset: NodeId,
    #[serde(flatten)]
    result: DepscoreResult,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    format: u32,
    graph: GraphSnapshot,
    #[serde(default)]
    policies: Vec<PolicyScript>,
    #[serde(default)]
    channels: Vec<ChannelDef>,
    #[serde(default)]
    depscores: Vec<DepscoreEntry>,
    #[serde(default)]
    audit: Vec<AuditRecord>,
}

fn corrupt(msg: impl Into<String>) -> StoreError {
    StoreError::CorruptSnapshot(msg.into())
}

impl StoreState {
    /// Pretty-printed snapshot JSON; equal states give equal bytes.
    pub fn to_json(&self) -> String {
        let file = SnapshotFile {
            format: SNAPSHOT_FORMAT,
            graph: self.graph.to_snapshot(),
            policies: self.policies.values().cloned().collect(),
            channels: self.channels.values().cloned().collect(),
            depscores: self
                .depscores
                .iter()
                .map(|((signal, asset), result)| DepscoreEntry {
                    signal: signal.clone(),
                    asset: asset.clone(),
                    result: result.clone(),
                })
                .collect(),
            audit: self.audit.clone(),
        };
        serde_json::to_string_pretty(&file).expect("snapshot always serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, StoreError> {
        let file: SnapshotFile = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
        if file.format != SNAPSHOT_FORMAT {
            return Err(corrupt(format!("unsupported format {}", file.format)));
        }
        let graph = OrgGraph::from_snapshot(file.graph).map_err(|e| corrupt(e.to_string()))?;

        let mut policies = BTreeMap::new();
        for p in file.policies {
            if policies.contains_key(&p.policy_id) {
                return Err(corrupt(format!("duplicate policy `{}`", p.policy_id)));
            }
            policies.insert(p.policy_id.clone(), p);
        }

        let mut channels = BTreeMap::new();
        for c in file.channels {
            c.validate()
                .map_err(|e| corrupt(format!("channel `{}`: {e}", c.channel_id)))?;
            if channels.contains_key(&c.channel_id) {
                return Err(corrupt(format!("duplicate channel `{}`", c.channel_id)));
            }
            channels.insert(c.channel_id.clone(), c);
        }

        let mut depscores = DepscoreIndex::new();
        for e in file.depscores {
            graph
                .expect_kind(&e.signal, NodeKind::Signal)
                .and_then(|_| graph.expect_kind(&e.asset, NodeKind::Asset))
                .map_err(|err| corrupt(format!("depscore entry: {err}")))?;
            if e.result.depscore > 100 || !(0.0..=1.0).contains(&e.result.epd) {
                return Err(corrupt(format!("depscore entry {}/{} out of range", e.signal, e.asset)));
            }
            if depscores
                .insert((e.signal.clone(), e.asset.clone()), e.result)
                .is_some()
            {
                return Err(corrupt(format!("duplicate depscore entry {}/{}", e.signal, e.asset)));
            }
        }

        Ok(Self {
            graph,
            policies,
            channels,
            depscores,
            audit: file.audit,
        })
    }

    /// EPD per `(signal, asset)` for risk computations.
    pub fn epd_index(&self) -> deptex_core::risk::EpdIndex {
        self.depscores.iter().map(|(k, r)| (k.clone(), r.epd)).collect()
    }

    /// Drops depscores whose signal or asset no longer exists.
    pub fn prune_depscores(&mut self) {
        let live: BTreeSet<NodeId> = self.graph.nodes().map(|n| n.id().clone()).collect();
        self.depscores.retain(|(s, a), _| live.contains(s) && live.contains(a));
    }
}

/// State plus the file it is persisted to, if any.
#[derive(Debug)]
pub struct Store {
    path: Option<PathBuf>,
    pub state: StoreState,
}

impl Store {
    /// A store that never touches the disk.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            state: StoreState::default(),
        }
    }

    /// Loads `path`, or starts empty if the file does not exist yet.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let state = match std::fs::read(&path) {
            Ok(bytes) => StoreState::from_json(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreState::default(),
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        Ok(Self {
            path: Some(path),
            state,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Atomically replaces the snapshot file. A no-op for in-memory stores.
    pub fn persist(&self) -> Result<(), StoreError> {
        match &self.path {
            Some(path) => write_atomic(path, self.state.to_json().as_bytes()),
            None => Ok(()),
        }
    }
}

/// Writes `bytes` to a sibling temp file, syncs it and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
