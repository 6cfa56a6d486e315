//! Pull-request gate: every pr-context policy judges the dependency delta.

use deptex_core::graph::{NodeId, OrgGraph};
use deptex_core::ingest::{dependency_delta, DependencyDelta, SbomDocument};
use deptex_core::policy::{
    evaluate, ContextBinding, Decision, PolicyContext, PolicyError, PolicyOutcome, PolicyScript, PrMeta,
};
use deptex_core::transport::HttpTransport;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const NO_POLICIES_NOTE: &str = "no pr policies configured; allowed by default";

/// SBOMs travel as CycloneDX JSON, the same format `POST /assets/{id}/sbom`
/// accepts.
mod cyclonedx {
    use deptex_core::ingest::{parse_sbom, SbomDocument};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(doc: &SbomDocument, s: S) -> Result<S::Ok, S::Error> {
        doc.to_cyclonedx().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SbomDocument, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        parse_sbom(value.to_string().as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRequest {
    pub asset_ref: NodeId,
    #[serde(with = "cyclonedx")]
    pub base_sbom: SbomDocument,
    #[serde(with = "cyclonedx")]
    pub head_sbom: SbomDocument,
    #[serde(default)]
    pub pr_meta: PrMeta,
}

/// Verdict of one pr policy. A failed evaluation carries `error` and
/// counts as a block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateEvaluation {
    pub policy_id: String,
    pub decision: Decision,
    pub comment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<PolicyError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub decision: Decision,
    pub comment: String,
    pub evaluations: Vec<GateEvaluation>,
    pub delta: DependencyDelta,
}

/// Evaluates every pr policy against the delta between the two SBOMs.
/// Any block or failed evaluation blocks; comments are joined in policy_id
/// order. The graph is only read.
pub fn gate_pr<'a>(
    graph: &OrgGraph,
    policies: impl IntoIterator<Item = &'a PolicyScript>,
    req: &GateRequest,
    transport: &dyn HttpTransport,
) -> Result<GateResult, ServiceError> {
    graph.asset(&req.asset_ref)?;
    req.base_sbom.validate()?;
    req.head_sbom.validate()?;
    let delta = dependency_delta(&req.base_sbom, &req.head_sbom);

    let mut ordered: Vec<&PolicyScript> = policies
        .into_iter()
        .filter(|p| p.context == PolicyContext::Pr)
        .collect();
    ordered.sort_by(|a, b| a.policy_id.cmp(&b.policy_id));
    if ordered.is_empty() {
        return Ok(GateResult {
            decision: Decision::Allow,
            comment: NO_POLICIES_NOTE.into(),
            evaluations: Vec::new(),
            delta,
        });
    }

    let binding = ContextBinding::pr(graph, &req.asset_ref, &delta, req.pr_meta.clone())?;
    let evaluations: Vec<GateEvaluation> = ordered
        .iter()
        .map(|p| match evaluate(p, &binding, &p.budget, transport) {
            Ok(PolicyOutcome::Pr { decision, comment }) => GateEvaluation {
                policy_id: p.policy_id.clone(),
                decision,
                comment,
                error: None,
            },
            Ok(other) => unreachable!("pr script produced a {} outcome", other.context()),
            Err(e) => GateEvaluation {
                policy_id: p.policy_id.clone(),
                decision: Decision::Block,
                comment: format!("evaluation failed: {e}"),
                error: Some(e),
            },
        })
        .collect();

    let decision = if evaluations.iter().any(|e| e.decision == Decision::Block) {
        Decision::Block
    } else {
        Decision::Allow
    };
    let comment = evaluations
        .iter()
        .filter(|e| !e.comment.is_empty())
        .map(|e| format!("{}: {}", e.policy_id, e.comment))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(GateResult {
        decision,
        comment,
        evaluations,
        delta,
    })
}
