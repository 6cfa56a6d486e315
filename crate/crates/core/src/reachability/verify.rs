use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EntryKind, EpdParams, ReachError, SliceReport};
use crate::transport::{HttpRequest, HttpTransport};

pub const DEFAULT_VERIFIER_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierVerdict {
    pub w_entry: f64,
    pub is_sanitized: bool,
    pub rationale: String,
}

pub trait SemanticVerifier: Send + Sync {
    fn verify(&self, slice: &SliceReport, entry: &str, params: &EpdParams) -> Result<VerifierVerdict, ReachError>;
}

/// Deterministic verifier: exposure from the entry-kind weight table,
/// sanitization from shortest-path coverage.
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleBasedVerifier;

impl SemanticVerifier for RuleBasedVerifier {
    fn verify(&self, slice: &SliceReport, entry: &str, params: &EpdParams) -> Result<VerifierVerdict, ReachError> {
        rule_based_verify(slice, entry, params)
    }
}

pub fn rule_based_verify(slice: &SliceReport, entry: &str, params: &EpdParams) -> Result<VerifierVerdict, ReachError> {
    slice.check_entry(entry)?;
    let kind = slice.function(entry).and_then(|f| f.entry_kind);
    let w_entry = params.weight(kind);
    let is_sanitized = slice.shortest_paths_sanitized(entry)?;
    let kind_label = kind
        .map(|k| {
            serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        })
        .unwrap_or_else(|| "unclassified".into());
    let rationale = if is_sanitized {
        format!(
            "entry {entry} ({kind_label}, w={w_entry}); every shortest path to {} crosses a sanitizer",
            slice.sink
        )
    } else {
        format!(
            "entry {entry} ({kind_label}, w={w_entry}); unsanitized path to {}",
            slice.sink
        )
    };
    Ok(VerifierVerdict {
        w_entry,
        is_sanitized,
        rationale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetRef {
    pub fn_id: String,
    pub name: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRef {
    pub fn_id: String,
    pub entry_kind: Option<EntryKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkRef {
    pub fn_id: String,
}

/// Body POSTed to an external verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierRequest {
    pub snippets: Vec<SnippetRef>,
    pub entry: EntryRef,
    pub sink: SinkRef,
}

impl VerifierRequest {
    pub fn build(slice: &SliceReport, entry: &str) -> Result<Self, ReachError> {
        slice.check_entry(entry)?;
        Ok(Self {
            snippets: slice
                .functions
                .iter()
                .map(|f| SnippetRef {
                    fn_id: f.fn_id.clone(),
                    name: f.name.clone(),
                    snippet: f.snippet.clone(),
                })
                .collect(),
            entry: EntryRef {
                fn_id: entry.to_string(),
                entry_kind: slice.function(entry).and_then(|f| f.entry_kind),
            },
            sink: SinkRef {
                fn_id: slice.sink.clone(),
            },
        })
    }
}

/// Asks the endpoint for a verdict without any fallback.
pub fn try_external_verify(
    slice: &SliceReport,
    entry: &str,
    endpoint: &str,
    transport: &dyn HttpTransport,
    timeout: Duration,
) -> Result<VerifierVerdict, ReachError> {
    let body = serde_json::to_value(VerifierRequest::build(slice, entry)?)
        .map_err(|e| ReachError::SchemaViolation(e.to_string()))?;
    let request = HttpRequest::post_json(endpoint, &body).with_timeout(timeout);
    let response = transport
        .send(&request)
        .map_err(|e| ReachError::TransportFailure(e.0))?;
    if !response.is_success() {
        return Err(ReachError::TransportFailure(format!("HTTP {}", response.status)));
    }
    let verdict: VerifierVerdict =
        serde_json::from_str(&response.body).map_err(|e| ReachError::SchemaViolation(e.to_string()))?;
    if !(0.0..=1.0).contains(&verdict.w_entry) {
        return Err(ReachError::SchemaViolation(format!(
            "w_entry {} outside [0, 1]",
            verdict.w_entry
        )));
    }
    Ok(verdict)
}

/// External verdict, falling back to [`rule_based_verify`] on transport or
/// schema failures.
pub fn external_verify(
    slice: &SliceReport,
    entry: &str,
    endpoint: &str,
    transport: &dyn HttpTransport,
    params: &EpdParams,
) -> Result<VerifierVerdict, ReachError> {
    ExternalVerifier::new(endpoint, transport).verify(slice, entry, params)
}

pub struct ExternalVerifier<T> {
    pub endpoint: String,
    pub transport: T,
    pub timeout: Duration,
}

impl<T: HttpTransport> ExternalVerifier<T> {
    pub fn new(endpoint: impl Into<String>, transport: T) -> Self {
        Self {
            endpoint: endpoint.into(),
            transport,
            timeout: DEFAULT_VERIFIER_TIMEOUT,
        }
    }
}

impl<T: HttpTransport> SemanticVerifier for ExternalVerifier<T> {
    fn verify(&self, slice: &SliceReport, entry: &str, params: &EpdParams) -> Result<VerifierVerdict, ReachError> {
        slice.check_entry(entry)?;
        match try_external_verify(slice, entry, &self.endpoint, &self.transport, self.timeout) {
            Ok(v) => Ok(v),
            Err(e @ (ReachError::TransportFailure(_) | ReachError::SchemaViolation(_))) => {
                log::warn!(
                    "external verifier at {} failed ({e}); using rule-based verdict",
                    self.endpoint
                );
                rule_based_verify(slice, entry, params)
            }
            Err(e) => Err(e),
        }
    }
}
