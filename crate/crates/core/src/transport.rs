//! Outbound HTTP abstraction.
//!
//! The library never opens sockets itself; everything that talks to the
//! outside world (external verifier, policy `http_get`/`http_post`, webhook
//! channels) goes through an [`HttpTransport`]. Deployments plug in a real
//! client, tests plug in [`MockTransport`].

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(skip)]
    pub timeout: Option<Duration>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
            timeout: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(body.to_string()),
            timeout: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn ok_json(body: serde_json::Value) -> Self {
        Self {
            status: 200,
            body: body.to_string(),
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("transport failure: {0}")]
pub struct TransportError(pub String);

pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: HttpTransport + ?Sized> HttpTransport for &T {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

impl<T: HttpTransport + ?Sized> HttpTransport for Arc<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// Rejects every request. Used where no network access is configured.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineTransport;

impl HttpTransport for OfflineTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        Err(TransportError(format!("offline: {}", request.url)))
    }
}

type Responder = Box<dyn Fn(&HttpRequest) -> Result<HttpResponse, TransportError> + Send + Sync>;

/// Canned responses keyed by URL prefix; records every request it sees.
/// Routes are tried in insertion order.
#[derive(Default)]
pub struct MockTransport {
    routes: Vec<(Option<Method>, String, Responder)>,
    calls: Mutex<Vec<HttpRequest>>,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(
        mut self,
        method: Option<Method>,
        prefix: &str,
        responder: impl Fn(&HttpRequest) -> Result<HttpResponse, TransportError> + Send + Sync + 'static,
    ) -> Self {
        self.routes.push((method, prefix.to_string(), Box::new(responder)));
        self
    }

    /// Any method on `prefix` answers 200 with `body`.
    pub fn json(self, prefix: &str, body: serde_json::Value) -> Self {
        self.route(None, prefix, move |_| Ok(HttpResponse::ok_json(body.clone())))
    }

    pub fn failing(self, prefix: &str) -> Self {
        self.route(None, prefix, |r| {
            Err(TransportError(format!("connection refused: {}", r.url)))
        })
    }

    pub fn calls(&self) -> Vec<HttpRequest> {
        self.calls.lock().expect("mock transport lock").clone()
    }
}

impl HttpTransport for MockTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.calls.lock().expect("mock transport lock").push(request.clone());
        for (method, prefix, responder) in &self.routes {
            if method.is_none_or(|m| m == request.method) && request.url.starts_with(prefix.as_str()) {
                return responder(request);
            }
        }
        Ok(HttpResponse {
            status: 404,
            body: String::new(),
        })
    }
}

/// One exchange captured by [`RecordingTransport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpExchange {
    pub request: HttpRequest,
    pub response: Result<HttpResponse, TransportError>,
}

/// Passes requests through to an inner transport and keeps a log.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<HttpExchange>>,
}

impl<T: HttpTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn into_log(self) -> Vec<HttpExchange> {
        self.log.into_inner().expect("recording transport lock")
    }

    pub fn log(&self) -> Vec<HttpExchange> {
        self.log.lock().expect("recording transport lock").clone()
    }
}

impl<T: HttpTransport> HttpTransport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(request);
        self.log.lock().expect("recording transport lock").push(HttpExchange {
            request: request.clone(),
            response: response.clone(),
        });
        response
    }
}
