//! Blocking HTTP client behind the core [`HttpTransport`] trait.

use std::time::Duration;

use deptex_core::transport::{HttpRequest, HttpResponse, HttpTransport, Method, TransportError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// [`HttpTransport`] backed by a shared `ureq` agent. Non-2xx statuses are
/// returned as responses, not errors.
#[derive(Clone)]
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl UreqTransport {
    pub fn new() -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(DEFAULT_TIMEOUT))
            .build()
            .into();
        Self { agent }
    }
}

impl HttpTransport for UreqTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let fail = |e: ureq::Error| TransportError(format!("{} {}: {e}", method_name(request.method), request.url));
        let timeout = request.timeout.unwrap_or(DEFAULT_TIMEOUT);
        let mut response = match request.method {
            Method::Get => {
                let mut b = self.agent.get(&request.url);
                for (k, v) in &request.headers {
                    b = b.header(k, v);
                }
                b.config().timeout_global(Some(timeout)).build().call().map_err(fail)?
            }
            Method::Post => {
                let mut b = self.agent.post(&request.url);
                for (k, v) in &request.headers {
                    b = b.header(k, v);
                }
                b.config()
                    .timeout_global(Some(timeout))
                    .build()
                    .send(request.body.as_deref().unwrap_or_default())
                    .map_err(fail)?
            }
        };
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(fail)?;
        Ok(HttpResponse { status, body })
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Get => "GET",
        Method::Post => "POST",
    }
}
