use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    #[default]
    Webhook,
}

/// A named webhook target that notification policies dispatch to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDef {
    pub channel_id: String,
    #[serde(default)]
    pub kind: ChannelKind,
    pub endpoint: String,
    /// Key for the `X-Deptex-Signature` HMAC; unsigned when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<String>,
    #[serde(default)]
    pub description: String,
}

impl ChannelDef {
    pub fn webhook(channel_id: &str, endpoint: &str) -> Self {
        Self {
            channel_id: channel_id.into(),
            kind: ChannelKind::Webhook,
            endpoint: endpoint.into(),
            secret: None,
            description: String::new(),
        }
    }

    pub fn with_secret(mut self, secret: &str) -> Self {
        self.secret = Some(secret.into());
        self
    }

    /// Non-empty id and an absolute http(s) endpoint.
    pub fn validate(&self) -> Result<(), String> {
        if self.channel_id.is_empty() {
            return Err("channel_id must be non-empty".into());
        }
        let url = url::Url::parse(&self.endpoint).map_err(|e| format!("endpoint `{}`: {e}", self.endpoint))?;
        if !matches!(url.scheme(), "http" | "https") || !url.has_host() {
            return Err(format!("endpoint `{}` must be an http(s) URL", self.endpoint));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_must_be_http() {
        assert!(ChannelDef::webhook("pager", "https://events.example/v2")
            .validate()
            .is_ok());
        assert!(ChannelDef::webhook("pager", "not a url").validate().is_err());
        assert!(ChannelDef::webhook("pager", "ftp://x.example/").validate().is_err());
        assert!(ChannelDef::webhook("", "https://x.example/").validate().is_err());
    }
}
