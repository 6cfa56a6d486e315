//! Webhook delivery of notification dispatches.

use std::collections::BTreeMap;
use std::time::Duration;

use deptex_core::policy::Dispatch;
use deptex_core::transport::{HttpRequest, HttpTransport};
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::channel::ChannelDef;

pub const SIGNATURE_HEADER: &str = "X-Deptex-Signature";
pub const DELIVERY_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DispatchError {
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
}

/// Failed deliveries are retried `retries` times, waiting `base_delay`,
/// then twice that, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::ZERO,
        }
    }

    /// Wait before each retry: 1 s, 2 s, 4 s with the default policy.
    pub fn delays(&self) -> Vec<Duration> {
        (0..self.retries).map(|i| self.base_delay * 2u32.pow(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryState {
    Delivered,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryStatus {
    pub channel_id: String,
    pub asset: Option<String>,
    pub status: DeliveryState,
    pub attempts: u32,
    pub http_status: Option<u16>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DeliveryReport {
    pub deliveries: Vec<DeliveryStatus>,
}

impl DeliveryReport {
    pub fn delivered(&self) -> usize {
        self.deliveries
            .iter()
            .filter(|d| d.status == DeliveryState::Delivered)
            .count()
    }
}

/// `sha256=<hex>` HMAC of `body` keyed with `secret`.
pub fn sign(secret: &str, body: &[u8]) -> String {
    let mut mac = Hmac::<Sha256>::new_from_slice(secret.as_bytes()).expect("hmac accepts any key length");
    mac.update(body);
    format!("sha256={}", hex::encode(mac.finalize().into_bytes()))
}

/// Pairs every dispatch with its channel. Fails before anything is sent if
/// one channel is unknown.
pub fn resolve(
    dispatches: &[Dispatch],
    channels: &BTreeMap<String, ChannelDef>,
) -> Result<Vec<(Dispatch, ChannelDef)>, DispatchError> {
    dispatches
        .iter()
        .map(|d| {
            channels
                .get(&d.channel_id)
                .map(|c| (d.clone(), c.clone()))
                .ok_or_else(|| DispatchError::UnknownChannel(d.channel_id.clone()))
        })
        .collect()
}

pub fn request_for(dispatch: &Dispatch, channel: &ChannelDef) -> HttpRequest {
    let mut request = HttpRequest::post_json(&channel.endpoint, &dispatch.payload).with_timeout(DELIVERY_TIMEOUT);
    if let Some(secret) = &channel.secret {
        let signature = sign(secret, request.body.as_deref().unwrap_or_default().as_bytes());
        request = request.with_header(SIGNATURE_HEADER, &signature);
    }
    request
}

/// Sends one dispatch, retrying per `retry`. `sleep` is called with each
/// back-off delay.
pub fn deliver(
    dispatch: &Dispatch,
    channel: &ChannelDef,
    transport: &dyn HttpTransport,
    retry: &RetryPolicy,
    sleep: &dyn Fn(Duration),
) -> DeliveryStatus {
    let request = request_for(dispatch, channel);
    let mut delays = retry.delays().into_iter();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let (http_status, error) = match transport.send(&request) {
            Ok(r) if r.is_success() => (Some(r.status), None),
            Ok(r) => (Some(r.status), Some(format!("HTTP {}", r.status))),
            Err(e) => (None, Some(e.to_string())),
        };
        let done = error.is_none();
        match delays.next() {
            Some(delay) if !done => {
                log::warn!(
                    "delivery to {} failed ({}), retrying in {delay:?}",
                    channel.channel_id,
                    error.as_deref().unwrap_or_default()
                );
                sleep(delay);
            }
            _ => {
                return DeliveryStatus {
                    channel_id: channel.channel_id.clone(),
                    asset: dispatch
                        .payload
                        .get("asset")
                        .and_then(|a| a.as_str())
                        .map(str::to_owned),
                    status: if done {
                        DeliveryState::Delivered
                    } else {
                        DeliveryState::Failed
                    },
                    attempts,
                    http_status,
                    error,
                }
            }
        }
    }
}

/// One POST per dispatch, in order. Delivery failures are reported, never
/// raised.
pub fn dispatch(
    dispatches: &[Dispatch],
    channels: &BTreeMap<String, ChannelDef>,
    transport: &dyn HttpTransport,
    retry: &RetryPolicy,
) -> Result<DeliveryReport, DispatchError> {
    dispatch_with(dispatches, channels, transport, retry, &std::thread::sleep)
}

pub fn dispatch_with(
    dispatches: &[Dispatch],
    channels: &BTreeMap<String, ChannelDef>,
    transport: &dyn HttpTransport,
    retry: &RetryPolicy,
    sleep: &dyn Fn(Duration),
) -> Result<DeliveryReport, DispatchError> {
    let resolved = resolve(dispatches, channels)?;
    Ok(DeliveryReport {
        deliveries: resolved
            .iter()
            .map(|(d, c)| deliver(d, c, transport, retry, sleep))
            .collect(),
    })
}
