//! Execution Path Dominance scoring.
//!
//! A [`SliceReport`] describes how an asset's entry points reach the
//! vulnerable sink of a signal. Scoring runs in three steps:
//!
//! 1. structural: shortest hop count `d` from each entry point to the sink;
//! 2. semantic: a [`SemanticVerifier`] weighs the entry point's exposure
//!    (`w_entry`) and decides whether sanitization neutralizes the path;
//! 3. decay: `epd = w_entry * alpha^d`, forced to exactly `0.0` when
//!    sanitized.
//!
//! With several entry points the maximum EPD wins.

mod slice;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, SignalNode};

pub use slice::{EntryKind, FlowKind, SliceEdge, SliceFunction, SliceReport};
pub use verify::{
    external_verify, rule_based_verify, try_external_verify, ExternalVerifier, RuleBasedVerifier, SemanticVerifier,
    VerifierRequest, VerifierVerdict, DEFAULT_VERIFIER_TIMEOUT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReachError {
    #[error("unknown entry point `{0}`")]
    UnknownEntry(String),
    #[error("malformed slice: {0}")]
    MalformedSlice(String),
    #[error("slice mismatch: {0}")]
    SliceMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("verifier transport failure: {0}")]
    TransportFailure(String),
    #[error("verifier schema violation: {0}")]
    SchemaViolation(String),
}

pub const DEFAULT_ALPHA: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpdParams {
    pub alpha: f64,
    pub entry_weight_table: BTreeMap<EntryKind, f64>,
}

impl Default for EpdParams {
    fn default() -> Self {
        Self::with_alpha(DEFAULT_ALPHA).expect("default alpha is valid")
    }
}

impl EpdParams {
    /// Default exposure weights with the given attenuation factor.
    pub fn with_alpha(alpha: f64) -> Result<Self, ReachError> {
        let params = Self {
            alpha,
            entry_weight_table: BTreeMap::from([
                (EntryKind::PublicHttp, 1.0),
                (EntryKind::AuthenticatedHttp, 0.6),
                (EntryKind::InternalRpc, 0.4),
                (EntryKind::Cli, 0.25),
                (EntryKind::BackgroundJob, 0.1),
            ]),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ReachError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ReachError::InvalidParams(format!(
                "alpha {} outside (0, 1]",
                self.alpha
            )));
        }
        for (k, w) in &self.entry_weight_table {
            if !(0.0..=1.0).contains(w) {
                return Err(ReachError::InvalidParams(format!("weight for {k:?} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Weight of an entry kind; unknown or unclassified entries count as
    /// fully exposed.
    pub fn weight(&self, kind: Option<EntryKind>) -> f64 {
        kind.and_then(|k| self.entry_weight_table.get(&k).copied())
            .unwrap_or(1.0)
    }
}

/// `w_entry * alpha^d`, or exactly `0.0` when sanitized.
pub fn compute_epd(d: u32, verdict: &VerifierVerdict, params: &EpdParams) -> f64 {
    if verdict.is_sanitized {
        return 0.0;
    }
    verdict.w_entry * params.alpha.powi(d as i32)
}

/// Integer priority in `[0, 100]`: `round(100 * severity/10 * epd)`,
/// rounding halves up.
pub fn depscore_value(severity: f64, epd: f64) -> u32 {
    let raw = 100.0 * (severity / 10.0) * epd;
    (raw + 0.5).floor().clamp(0.0, 100.0) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepscoreResult {
    pub d: u32,
    pub entry_point: String,
    pub w_entry: f64,
    pub is_sanitized: bool,
    pub epd: f64,
    pub depscore: u32,
    pub rationale: String,
}

/// Depscore results keyed by `(signal, asset)`.
pub type DepscoreIndex = BTreeMap<(NodeId, NodeId), DepscoreResult>;

/// Scores every entry point of `slice` and keeps the one with the highest
/// EPD. Entry points that cannot reach the sink are skipped; if none can,
/// the result carries `epd = 0`.
pub fn depscore(
    signal: &SignalNode,
    slice: &SliceReport,
    params: &EpdParams,
    verifier: &dyn SemanticVerifier,
) -> Result<DepscoreResult, ReachError> {
    params.validate()?;
    slice.validate()?;
    if slice.signal_ref != signal.id {
        return Err(ReachError::SliceMismatch(format!(
            "slice is for signal {} but {} was given",
            slice.signal_ref, signal.id
        )));
    }

    let mut best: Option<DepscoreResult> = None;
    for entry in &slice.entry_points {
        let Some(d) = slice.path_depth(entry)? else {
            continue;
        };
        let verdict = verifier.verify(slice, entry, params)?;
        let epd = compute_epd(d, &verdict, params);
        let candidate = DepscoreResult {
            d,
            entry_point: entry.clone(),
            w_entry: verdict.w_entry,
            is_sanitized: verdict.is_sanitized,
            epd,
            depscore: depscore_value(signal.severity, epd),
            rationale: verdict.rationale,
        };
        // strict comparison keeps the first entry on ties
        if best.as_ref().is_none_or(|b| candidate.epd > b.epd) {
            best = Some(candidate);
        }
    }

    Ok(best.unwrap_or_else(|| DepscoreResult {
        d: 0,
        entry_point: slice.entry_points[0].clone(),
        w_entry: 0.0,
        is_sanitized: false,
        epd: 0.0,
        depscore: 0,
        rationale: "no entry point reaches the sink".into(),
    }))
}
