//! Test fixtures: a recording HTTP stub and an API server on an ephemeral
//! port.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use deptex::api::{self, AppState};
use deptex::Service;

#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Recorded {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).expect("recorded body is JSON")
    }
}

type Responder = dyn Fn(&Recorded) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server that records every request and answers with a
/// caller-supplied responder.
pub struct Stub {
    base: String,
    requests: Arc<Mutex<Vec<Recorded>>>,
}

impl Stub {
    pub fn start(responder: impl Fn(&Recorded) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let base = format!("http://{}", listener.local_addr().expect("stub addr"));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        let responder: Arc<Responder> = Arc::new(responder);
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let log = Arc::clone(&log);
                let responder = Arc::clone(&responder);
                thread::spawn(move || handle(stream, &log, responder.as_ref()));
            }
        });
        Self { base, requests }
    }

    /// Answers 200 `{}` to everything.
    pub fn ok() -> Self {
        Self::start(|_| (200, "{}".into()))
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.requests.lock().expect("stub log").clone()
    }

    pub fn requests_to(&self, path: &str) -> Vec<Recorded> {
        self.requests().into_iter().filter(|r| r.path == path).collect()
    }
}

fn handle(stream: TcpStream, log: &Mutex<Vec<Recorded>>, responder: &Responder) {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut headers = Vec::new();
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 || h.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let len = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse::<usize>().ok())
        .unwrap_or(0);
    let mut body = vec![0; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let req = Recorded {
        method,
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let (status, reply) = responder(&req);
    log.lock().expect("stub log").push(req);
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    );
    let _ = stream.flush();
}

/// The REST API served from a background runtime.
pub struct Api {
    pub base: String,
    pub state: AppState,
}

impl Api {
    pub fn start(service: Service, token: Option<&str>) -> Self {
        let state = AppState::new(service, token.map(str::to_string));
        let std_listener = TcpListener::bind("127.0.0.1:0").expect("bind api");
        std_listener.set_nonblocking(true).expect("nonblocking");
        let base = format!("http://{}/api/v1", std_listener.local_addr().expect("api addr"));
        let served = state.clone();
        thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().expect("runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("tokio listener");
                axum::serve(listener, api::router(served)).await.expect("serve");
            });
        });
        Self { base, state }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

/// Blocking client that never treats a status as an error.
pub struct Client {
    agent: ureq::Agent,
    token: Option<String>,
}

impl Client {
    pub fn new(token: Option<&str>) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            agent,
            token: token.map(str::to_string),
        }
    }

    fn auth(&self) -> Option<String> {
        self.token.as_ref().map(|t| format!("Bearer {t}"))
    }

    pub fn get(&self, url: &str) -> (u16, String) {
        let mut req = self.agent.get(url);
        if let Some(a) = self.auth() {
            req = req.header("Authorization", &a);
        }
        let mut resp = req.call().expect("GET");
        (resp.status().as_u16(), resp.body_mut().read_to_string().expect("body"))
    }

    pub fn send(&self, method: &str, url: &str, body: &str) -> (u16, String) {
        let mut req = match method {
            "PUT" => self.agent.put(url),
            _ => self.agent.post(url),
        };
        req = req.header("Content-Type", "application/json");
        if let Some(a) = self.auth() {
            req = req.header("Authorization", &a);
        }
        let mut resp = req.send(body).expect("send");
        (resp.status().as_u16(), resp.body_mut().read_to_string().expect("body"))
    }

    pub fn post(&self, url: &str, body: &serde_json::Value) -> (u16, serde_json::Value) {
        let (status, text) = self.send("POST", url, &body.to_string());
        (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::Null))
    }

    pub fn get_json(&self, url: &str) -> (u16, serde_json::Value) {
        let (status, text) = self.get(url);
        (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::Null))
    }
}

/// Polls `cond` for up to five seconds.
pub fn wait_for(mut cond: impl FnMut() -> bool) -> bool {
    for _ in 0..100 {
        if cond() {
            return true;
        }
        thread::sleep(std::time::Duration::from_millis(50));
    }
    cond()
}
