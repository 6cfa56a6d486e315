use deptex_core::graph::GraphError;
use deptex_core::ingest::IngestError;
use deptex_core::policy::PolicyError;
use deptex_core::reachability::ReachError;
use deptex_core::risk::RiskError;
use thiserror::Error;

use crate::dispatch::DispatchError;
use crate::store::StoreError;

/// Error of a service operation. Each variant maps to one HTTP status.
#[derive(Debug, Error)]
pub enum ServiceError {
    /// Malformed input (400).
    #[error("{0}")]
    Validation(String),
    /// Referenced entity does not exist (404).
    #[error("{0}")]
    NotFound(String),
    /// Duplicate id or definition (409).
    #[error("{0}")]
    Conflict(String),
    /// Policy or typing violation (422).
    #[error("{0}")]
    Unprocessable(String),
    /// The store could not be read or written (503).
    #[error("store unavailable: {0}")]
    Unavailable(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            Self::Validation(_) => 400,
            Self::NotFound(_) => 404,
            Self::Conflict(_) => 409,
            Self::Unprocessable(_) => 422,
            Self::Unavailable(_) => 503,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Validation(_) => "validation",
            Self::NotFound(_) => "not_found",
            Self::Conflict(_) => "conflict",
            Self::Unprocessable(_) => "unprocessable",
            Self::Unavailable(_) => "unavailable",
        }
    }
}

impl From<GraphError> for ServiceError {
    fn from(e: GraphError) -> Self {
        let msg = e.to_string();
        match e {
            GraphError::NotFound(_) | GraphError::MissingEndpoint(_) => Self::NotFound(msg),
            GraphError::DuplicateId(_) | GraphError::DuplicateEdge { .. } | GraphError::DuplicateDefinition(_) => {
                Self::Conflict(msg)
            }
            GraphError::InvalidField { .. } => Self::Validation(msg),
            GraphError::TypeViolation { .. }
            | GraphError::WrongKind { .. }
            | GraphError::UnknownTier(_)
            | GraphError::UnknownStatus(_) => Self::Unprocessable(msg),
            GraphError::CorruptSnapshot(_) => Self::Unavailable(msg),
        }
    }
}

impl From<IngestError> for ServiceError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Graph(g) => g.into(),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<ReachError> for ServiceError {
    fn from(e: ReachError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<RiskError> for ServiceError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Graph(g) => g.into(),
            other => Self::Unprocessable(other.to_string()),
        }
    }
}

impl From<PolicyError> for ServiceError {
    fn from(e: PolicyError) -> Self {
        Self::Unprocessable(e.to_string())
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        Self::Unavailable(e.to_string())
    }
}

impl From<DispatchError> for ServiceError {
    fn from(e: DispatchError) -> Self {
        match e {
            DispatchError::UnknownChannel(_) => Self::Unprocessable(e.to_string()),
        }
    }
}
