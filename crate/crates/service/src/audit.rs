use serde::{Deserialize, Serialize};

/// One append-only audit entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub actor: String,
    pub action: String,
    pub subject: String,
    #[serde(default)]
    pub detail: serde_json::Value,
}

impl AuditRecord {
    pub fn now(actor: &str, action: &str, subject: impl Into<String>, detail: serde_json::Value) -> Self {
        Self {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            actor: actor.into(),
            action: action.into(),
            subject: subject.into(),
            detail,
        }
    }
}
