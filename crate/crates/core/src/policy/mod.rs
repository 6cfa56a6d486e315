//! PolicyLang: a small, bounded policy language evaluated in four contexts.
//!
//! A script is bound to one [`PolicyContext`] and reads a read-only
//! [`ContextBinding`]. The only effects are the actions it calls, collected
//! into a [`PolicyOutcome`] that the caller applies:
//!
//! | context        | actions                              | neutral outcome |
//! |----------------|--------------------------------------|-----------------|
//! | `status`       | `transition(status_id)`              | no transition   |
//! | `policy`       | `violation(msg)`                     | pass            |
//! | `pr`           | `allow([comment])`, `block([comment])` | none: a verdict is required |
//! | `notification` | `dispatch(channel_id, asset[, event])` | no dispatch     |
//!
//! Evaluation is bounded by a [`SandboxBudget`]: statement steps, HTTP calls
//! and wall-clock time. Outbound HTTP only reaches URLs under an allowlisted
//! prefix and always goes through an [`HttpTransport`], so tests can replace
//! the network with a mock.
//!
//! ```
//! use deptex_core::policy::{evaluate, ContextBinding, PolicyScript, SandboxBudget};
//! use deptex_core::transport::OfflineTransport;
//!
//! let script = PolicyScript::from_source("no-gpl", r#"
//!     #context: policy
//!     for l in component.licenses {
//!         if regex_match("^GPL", l) { violation("copyleft license " + l); }
//!     }
//! "#).unwrap();
//! let binding: ContextBinding = serde_json::from_value(serde_json::json!({
//!     "context": "policy",
//!     "component": {"id": "c", "purl": "pkg:npm/x@1.0.0", "name": "x", "version": "1.0.0",
//!                   "licenses": ["MIT", "GPL-3.0"], "maintainer_count": 1}
//! })).unwrap();
//! let outcome = evaluate(&script, &binding, &SandboxBudget::default(), &OfflineTransport).unwrap();
//! assert!(!outcome.is_neutral());
//! ```

mod ast;
mod context;
mod interp;
mod lexer;
mod parser;
mod value;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, OrgGraph};
use crate::reachability::DepscoreIndex;
use crate::transport::{HttpExchange, HttpTransport, RecordingTransport};

pub use ast::{BinOp, Expr, ExprKind, Program, Stmt, StmtKind, UnOp};
pub use context::{
    AssetView, BlastView, ComponentMeta, ContextBinding, Decision, DeltaView, Dispatch, NotificationBinding,
    NotifiedAsset, PolicyBinding, PolicyContext, PolicyOutcome, PrBinding, PrMeta, RiskSummary, SignalView,
    StatusBinding,
};
pub use interp::{TraceEntry, DEFAULT_EVENT, TRACE_CAP};
pub use lexer::Pos;
pub use parser::{parse_policy, ACTIONS, HOST_FUNCTIONS};
pub use value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    Steps,
    Http,
    Time,
}

impl std::fmt::Display for BudgetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BudgetKind::Steps => "steps",
            BudgetKind::Http => "http",
            BudgetKind::Time => "time",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("budget exceeded: {budget}")]
    BudgetExceeded { budget: BudgetKind },
    #[error("http request to {url} denied: not in allowlist")]
    HttpDenied { url: String },
    #[error("http request failed: {reason}")]
    HttpFailure { reason: String },
    #[error("runtime type error at {line}:{col}: {message}")]
    RuntimeType { line: u32, col: u32, message: String },
    #[error("pr policy finished without allow or block")]
    MissingVerdict,
    #[error("script context {script} does not match binding context {binding}")]
    ContextMismatch {
        script: PolicyContext,
        binding: PolicyContext,
    },
    #[error("unknown status `{status}`")]
    UnknownStatus { status: String },
    #[error("invalid budget: {reason}")]
    InvalidBudget { reason: String },
    #[error("graph error: {message}")]
    Graph { message: String },
}

impl From<GraphError> for PolicyError {
    fn from(e: GraphError) -> Self {
        PolicyError::Graph { message: e.to_string() }
    }
}

impl PolicyError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        PolicyError::Syntax {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

fn default_max_steps() -> u64 {
    100_000
}
fn default_max_http_calls() -> u32 {
    2
}
fn default_timeout_ms() -> u64 {
    5_000
}

/// Resource envelope for one evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxBudget {
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_max_http_calls")]
    pub max_http_calls: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// URL prefixes a script may reach. Empty denies all HTTP.
    #[serde(default)]
    pub http_allowlist: Vec<String>,
}

impl Default for SandboxBudget {
    fn default() -> Self {
        Self {
            max_steps: default_max_steps(),
            max_http_calls: default_max_http_calls(),
            timeout_ms: default_timeout_ms(),
            http_allowlist: Vec::new(),
        }
    }
}

impl SandboxBudget {
    pub fn with_allowlist(mut self, prefixes: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.http_allowlist = prefixes.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.max_steps == 0 || self.max_http_calls == 0 || self.timeout_ms == 0 {
            return Err(PolicyError::InvalidBudget {
                reason: "max_steps, max_http_calls and timeout_ms must be positive".into(),
            });
        }
        Ok(())
    }

    /// True if `url` starts with an allowlisted prefix at a boundary: a
    /// prefix not ending in `/` must be followed by `/`, `?`, `#`, `:` or
    /// the end of the URL, so `https://a.example` does not admit
    /// `https://a.example.evil`.
    pub fn allows(&self, url: &str) -> bool {
        self.http_allowlist.iter().any(|prefix| {
            let Some(rest) = url.strip_prefix(prefix.as_str()) else {
                return false;
            };
            prefix.ends_with('/') || rest.is_empty() || rest.starts_with(['/', '?', '#', ':'])
        })
    }
}

/// A parsed script bound to its context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StoredPolicy", into = "StoredPolicy")]
pub struct PolicyScript {
    pub policy_id: String,
    pub context: PolicyContext,
    pub source: String,
    pub budget: SandboxBudget,
    compiled: Program,
}

/// Persisted form of a [`PolicyScript`]; the program is re-parsed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredPolicy {
    pub policy_id: String,
    pub context: PolicyContext,
    pub source: String,
    #[serde(default)]
    pub budget: SandboxBudget,
}

impl TryFrom<StoredPolicy> for PolicyScript {
    type Error = PolicyError;

    fn try_from(p: StoredPolicy) -> Result<Self, Self::Error> {
        PolicyScript::new(p.policy_id, p.context, p.source)?.with_budget(p.budget)
    }
}

impl From<PolicyScript> for StoredPolicy {
    fn from(p: PolicyScript) -> Self {
        StoredPolicy {
            policy_id: p.policy_id,
            context: p.context,
            source: p.source,
            budget: p.budget,
        }
    }
}

/// Reads the `#context: <name>` header comment, if any.
pub fn context_header(source: &str) -> Result<Option<(PolicyContext, Pos)>, PolicyError> {
    for (i, line) in source.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        let Some(comment) = trimmed.strip_prefix('#') else {
            return Ok(None);
        };
        let Some(rest) = comment.trim_start().strip_prefix("context") else {
            continue;
        };
        let Some(name) = rest.trim_start().strip_prefix(':') else {
            continue;
        };
        let pos = Pos {
            line: i as u32 + 1,
            col: (line.len() - trimmed.len()) as u32 + 1,
        };
        let ctx = name
            .trim()
            .parse::<PolicyContext>()
            .map_err(|e| PolicyError::syntax(pos, e))?;
        return Ok(Some((ctx, pos)));
    }
    Ok(None)
}

impl PolicyScript {
    /// Parses `source` for `context`. A `#context:` header, if present,
    /// must agree with `context`; actions of other contexts are rejected.
    pub fn new(
        policy_id: impl Into<String>,
        context: PolicyContext,
        source: impl Into<String>,
    ) -> Result<Self, PolicyError> {
        let source = source.into();
        if let Some((declared, pos)) = context_header(&source)? {
            if declared != context {
                return Err(PolicyError::syntax(
                    pos,
                    format!("header declares {declared} context but script is stored as {context}"),
                ));
            }
        }
        let compiled = parse_policy(&source)?;
        check_actions(&compiled.stmts, context)?;
        Ok(Self {
            policy_id: policy_id.into(),
            context,
            source,
            budget: SandboxBudget::default(),
            compiled,
        })
    }

    /// Parses a `.dpx` source whose context comes from its header.
    pub fn from_source(policy_id: impl Into<String>, source: impl Into<String>) -> Result<Self, PolicyError> {
        let source = source.into();
        let Some((context, _)) = context_header(&source)? else {
            return Err(PolicyError::syntax(
                Pos { line: 1, col: 1 },
                "missing `#context: <status|policy|pr|notification>` header",
            ));
        };
        Self::new(policy_id, context, source)
    }

    pub fn with_budget(mut self, budget: SandboxBudget) -> Result<Self, PolicyError> {
        budget.validate()?;
        self.budget = budget;
        Ok(self)
    }

    pub fn program(&self) -> &Program {
        &self.compiled
    }
}

fn check_actions(stmts: &[Stmt], context: PolicyContext) -> Result<(), PolicyError> {
    fn expr(e: &Expr, context: PolicyContext) -> Result<(), PolicyError> {
        match &e.kind {
            ExprKind::Call { name, args } => {
                if ACTIONS.contains(&name.as_str()) && !context.actions().contains(&name.as_str()) {
                    return Err(PolicyError::syntax(
                        e.pos,
                        format!("`{name}` is not available in {context} context"),
                    ));
                }
                args.iter().try_for_each(|a| expr(a, context))
            }
            ExprKind::List { items } => items.iter().try_for_each(|a| expr(a, context)),
            ExprKind::Record { fields } => fields.iter().try_for_each(|(_, a)| expr(a, context)),
            ExprKind::Member { target, .. } => expr(target, context),
            ExprKind::Index { target, index } => {
                expr(target, context)?;
                expr(index, context)
            }
            ExprKind::Unary { operand, .. } => expr(operand, context),
            ExprKind::Binary { lhs, rhs, .. } => {
                expr(lhs, context)?;
                expr(rhs, context)
            }
            ExprKind::Null
            | ExprKind::Bool { .. }
            | ExprKind::Num { .. }
            | ExprKind::Str { .. }
            | ExprKind::Ident { .. } => Ok(()),
        }
    }
    for s in stmts {
        match &s.kind {
            StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => expr(value, context)?,
            StmtKind::If { cond, then, otherwise } => {
                expr(cond, context)?;
                check_actions(then, context)?;
                if let Some(o) = otherwise {
                    check_actions(o, context)?;
                }
            }
            StmtKind::For { iter, body, .. } => {
                expr(iter, context)?;
                check_actions(body, context)?;
            }
            StmtKind::Call { call } => expr(call, context)?,
        }
    }
    Ok(())
}

fn check_binding(script: &PolicyScript, binding: &ContextBinding) -> Result<(), PolicyError> {
    if binding.context() != script.context {
        return Err(PolicyError::ContextMismatch {
            script: script.context,
            binding: binding.context(),
        });
    }
    Ok(())
}

/// Runs `script` against `binding`. Deterministic given the binding and the
/// transport's responses.
pub fn evaluate(
    script: &PolicyScript,
    binding: &ContextBinding,
    budget: &SandboxBudget,
    transport: &dyn HttpTransport,
) -> Result<PolicyOutcome, PolicyError> {
    check_binding(script, binding)?;
    budget.validate()?;
    interp::Interp::new(script.context, binding, budget, transport, false).run(script.program())
}

/// Evaluation with a step trace and a log of every HTTP exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DryRunReport {
    pub outcome: Option<PolicyOutcome>,
    pub error: Option<PolicyError>,
    pub trace: Vec<TraceEntry>,
    /// True if the trace hit [`TRACE_CAP`] entries and later steps were dropped.
    pub trace_truncated: bool,
    pub http_log: Vec<HttpExchange>,
    pub logs: Vec<String>,
}

impl DryRunReport {
    pub fn result(&self) -> Result<&PolicyOutcome, &PolicyError> {
        match (&self.outcome, &self.error) {
            (Some(o), _) => Ok(o),
            (None, Some(e)) => Err(e),
            (None, None) => unreachable!("dry run reports always carry an outcome or an error"),
        }
    }
}

/// Same evaluation as [`evaluate`], recording a trace capped at
/// [`TRACE_CAP`] entries and the HTTP exchanges. Errors are reported inside
/// the returned value together with the partial trace.
pub fn dry_run(
    script: &PolicyScript,
    binding: &ContextBinding,
    budget: &SandboxBudget,
    transport: &dyn HttpTransport,
) -> DryRunReport {
    let recorder = RecordingTransport::new(transport);
    let (result, trace, trace_truncated, logs) = match check_binding(script, binding).and_then(|_| budget.validate()) {
        Err(e) => (Err(e), Vec::new(), false, Vec::new()),
        Ok(()) => {
            let mut interp = interp::Interp::new(script.context, binding, budget, &recorder, true);
            let result = interp.run(script.program());
            (
                result,
                interp.trace.take().unwrap_or_default(),
                interp.trace_truncated,
                std::mem::take(&mut interp.logs),
            )
        }
    };
    let (outcome, error) = match result {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e)),
    };
    DryRunReport {
        outcome,
        error,
        trace,
        trace_truncated,
        http_log: recorder.into_log(),
        logs,
    }
}

/// One status-policy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusEvaluation {
    pub policy_id: String,
    pub outcome: Option<PolicyOutcome>,
    pub error: Option<PolicyError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedTransition {
    pub policy_id: String,
    pub asset: NodeId,
    pub from: String,
    pub to: String,
}

/// Every evaluation in policy_id order and the transition that won, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusRun {
    pub evaluations: Vec<StatusEvaluation>,
    pub applied: Option<AppliedTransition>,
}

/// Evaluates every status-context policy for `asset` in policy_id order and
/// applies the first non-neutral transition. Failing policies count as
/// neutral and are reported in the evaluations. A transition to a status
/// that is not defined fails with [`PolicyError::UnknownStatus`] and leaves
/// the graph unchanged.
pub fn run_status_policies(
    graph: &mut OrgGraph,
    policies: &[PolicyScript],
    asset: &NodeId,
    depscores: &DepscoreIndex,
    transport: &dyn HttpTransport,
) -> Result<StatusRun, PolicyError> {
    let binding = ContextBinding::status(graph, asset, depscores)?;
    let mut ordered: Vec<&PolicyScript> = policies.iter().filter(|p| p.context == PolicyContext::Status).collect();
    ordered.sort_by(|a, b| a.policy_id.cmp(&b.policy_id));

    let mut evaluations = Vec::new();
    let mut winner: Option<(String, String)> = None;
    for policy in ordered {
        let result = evaluate(policy, &binding, &policy.budget, transport);
        if let Ok(PolicyOutcome::Status {
            transition_to: Some(to),
        }) = &result
        {
            if winner.is_none() {
                winner = Some((policy.policy_id.clone(), to.clone()));
            }
        }
        let (outcome, error) = match result {
            Ok(o) => (Some(o), None),
            Err(e) => (None, Some(e)),
        };
        evaluations.push(StatusEvaluation {
            policy_id: policy.policy_id.clone(),
            outcome,
            error,
        });
    }

    let applied = match winner {
        None => None,
        Some((policy_id, to)) => {
            if graph.status(&to).is_none() {
                return Err(PolicyError::UnknownStatus { status: to });
            }
            let from = graph.asset(asset)?.compliance_status.clone();
            graph.set_compliance_status(asset, &to)?;
            Some(AppliedTransition {
                policy_id,
                asset: asset.clone(),
                from,
                to,
            })
        }
    };
    Ok(StatusRun { evaluations, applied })
}
