//! REST API under `/api/v1`.
//!
//! Handlers hand the work to a blocking thread holding the single service
//! lock, so all mutations are serialized. Webhook deliveries requested by
//! notification policies run on their own threads after the response has
//! been sent; their outcome lands in the audit log.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use deptex_core::graph::{Attrs, Edge, NodeId, NodeKind, StatusDef, TierDef};
use deptex_core::policy::Dispatch;
use deptex_core::risk::AggMode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::channel::ChannelDef;
use crate::dispatch::{deliver, resolve, DeliveryReport};
use crate::error::ServiceError;
use crate::gate::GateRequest;
use crate::service::{parse_tier_overrides, render_leaderboard, DryRunRequest, LeaderboardFormat, NewPolicy, Service};

#[derive(Clone)]
pub struct AppState {
    service: Arc<Mutex<Service>>,
    token: Option<String>,
}

impl AppState {
    /// `token` enables bearer authentication on every route but
    /// `/api/v1/health`.
    pub fn new(service: Service, token: Option<String>) -> Self {
        Self {
            service: Arc::new(Mutex::new(service)),
            token: token.filter(|t| !t.is_empty()),
        }
    }

    pub fn service(&self) -> Arc<Mutex<Service>> {
        self.service.clone()
    }
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = json!({"error": {"kind": self.0.kind(), "message": self.0.to_string()}});
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn with_service<T: Send + 'static>(
    state: &AppState,
    f: impl FnOnce(&mut Service) -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<T> {
    let service = state.service.clone();
    tokio::task::spawn_blocking(move || {
        let mut guard = service
            .lock()
            .map_err(|_| ServiceError::Unavailable("service lock poisoned".into()))?;
        f(&mut guard)
    })
    .await
    .map_err(|e| ServiceError::Unavailable(format!("worker failed: {e}")))?
    .map_err(ApiError)
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::Validation(format!("invalid request body: {e}")))
}

/// Delivers `dispatches` on a background thread and audits the report.
fn spawn_delivery(state: &AppState, dispatches: Vec<Dispatch>) {
    if dispatches.is_empty() {
        return;
    }
    let service = state.service.clone();
    tokio::task::spawn_blocking(move || {
        let (resolved, transport, retry) = {
            let Ok(svc) = service.lock() else { return };
            let Ok(resolved) = resolve(&dispatches, &svc.state().channels) else {
                return;
            };
            (resolved, svc.transport(), svc.config().retry)
        };
        let report = DeliveryReport {
            deliveries: resolved
                .iter()
                .map(|(d, c)| deliver(d, c, transport.as_ref(), &retry, &std::thread::sleep))
                .collect(),
        };
        if let Ok(mut svc) = service.lock() {
            if let Err(e) = svc.record_delivery(&report) {
                log::error!("could not record delivery report: {e}");
            }
        }
    });
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let Some(token) = &state.token else {
        return next.run(req).await;
    };
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(token.as_str()) {
        next.run(req).await
    } else {
        let body = json!({"error": {"kind": "unauthorized", "message": "missing or invalid bearer token"}});
        (StatusCode::UNAUTHORIZED, Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/orgs", post(create_org))
        .route("/units", post(create_unit))
        .route("/assets", post(create_asset))
        .route("/actors", post(create_actor))
        .route("/edges", post(create_edge))
        .route("/channels", post(create_channel).get(list_channels))
        .route("/tiers", post(create_tier).get(list_tiers))
        .route("/tiers/{id}", put(update_tier))
        .route("/statuses", post(create_status).get(list_statuses))
        .route("/policies", post(create_policy).get(list_policies))
        .route("/policies/{id}/dry-run", post(dry_run))
        .route("/assets/{id}/sbom", post(ingest_sbom))
        .route("/assets/{id}/tier", put(set_asset_tier))
        .route("/assets/{id}/depscores", get(depscores))
        .route("/signals/feed", post(ingest_feed))
        .route("/signals/{id}/blast-radius", get(blast_radius))
        .route("/signals/{id}/notify", post(notify))
        .route("/slices", post(ingest_slice))
        .route("/orgs/{id}/leaderboard", get(leaderboard))
        .route("/gate/pr", post(gate))
        .route("/audit", get(audit))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }));
    Router::new().nest("/api/v1", api).with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}

// ---- topology ----------------------------------------------------------

async fn create_node(
    state: AppState,
    kind: NodeKind,
    parent_key: Option<&'static str>,
    body: Bytes,
) -> ApiResult<Response> {
    let mut fields: Attrs = parse_json(&body)?;
    let parent = match parent_key.and_then(|k| fields.remove(k)) {
        None | Some(serde_json::Value::Null) => None,
        Some(serde_json::Value::String(p)) => Some(NodeId::new(p).map_err(ServiceError::from)?),
        Some(_) => {
            return Err(
                ServiceError::Validation(format!("`{}` must be a string", parent_key.unwrap_or_default())).into(),
            )
        }
    };
    let node = with_service(&state, move |s| s.create_node(kind, fields, parent)).await?;
    Ok(Json(node).into_response())
}

async fn create_org(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    create_node(state, NodeKind::Org, None, body).await
}

async fn create_unit(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    create_node(state, NodeKind::Unit, Some("org_id"), body).await
}

async fn create_asset(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    create_node(state, NodeKind::Asset, Some("unit_id"), body).await
}

async fn create_actor(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    create_node(state, NodeKind::Actor, None, body).await
}

async fn create_edge(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Edge>> {
    let edge: Edge = parse_json(&body)?;
    Ok(Json(with_service(&state, move |s| s.add_edge(edge)).await?))
}

// ---- definitions -------------------------------------------------------

async fn create_channel(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<ChannelDef>> {
    let channel: ChannelDef = parse_json(&body)?;
    Ok(Json(with_service(&state, move |s| s.add_channel(channel)).await?))
}

async fn list_channels(State(state): State<AppState>) -> ApiResult<Json<Vec<ChannelDef>>> {
    let list = with_service(&state, |s| Ok(s.state().channels.values().cloned().collect())).await?;
    Ok(Json(list))
}

async fn create_tier(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<TierDef>> {
    let tier: TierDef = parse_json(&body)?;
    Ok(Json(with_service(&state, move |s| s.add_tier(tier)).await?))
}

async fn update_tier(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<TierDef>> {
    let tier: TierDef = parse_json(&body)?;
    if tier.tier_id != id {
        return Err(
            ServiceError::Validation(format!("body tier_id `{}` does not match path `{id}`", tier.tier_id)).into(),
        );
    }
    Ok(Json(with_service(&state, move |s| s.update_tier(tier)).await?))
}

async fn list_tiers(State(state): State<AppState>) -> ApiResult<Json<Vec<TierDef>>> {
    let list = with_service(&state, |s| Ok(s.state().graph.tiers().cloned().collect())).await?;
    Ok(Json(list))
}

async fn create_status(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<StatusDef>> {
    let status: StatusDef = parse_json(&body)?;
    Ok(Json(with_service(&state, move |s| s.add_status(status)).await?))
}

async fn list_statuses(State(state): State<AppState>) -> ApiResult<Json<Vec<StatusDef>>> {
    let list = with_service(&state, |s| Ok(s.state().graph.statuses().cloned().collect())).await?;
    Ok(Json(list))
}

async fn create_policy(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: NewPolicy = parse_json(&body)?;
    let p = with_service(&state, move |s| s.add_policy(req)).await?;
    Ok(Json(p).into_response())
}

async fn list_policies(State(state): State<AppState>) -> ApiResult<Response> {
    let list: Vec<_> = with_service(&state, |s| Ok(s.state().policies.values().cloned().collect::<Vec<_>>())).await?;
    Ok(Json(list).into_response())
}

#[derive(Deserialize)]
struct TierChange {
    tier: String,
}

async fn set_asset_tier(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let change: TierChange = parse_json(&body)?;
    let asset = NodeId::new(id).map_err(ServiceError::from)?;
    let tier = change.tier.clone();
    with_service(&state, move |s| s.set_asset_tier(&asset, &tier)).await?;
    Ok(Json(json!({"tier": change.tier})).into_response())
}

// ---- ingestion ---------------------------------------------------------

async fn ingest_sbom(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let asset = NodeId::new(id).map_err(ServiceError::from)?;
    let report = with_service(&state, move |s| s.ingest_sbom(&asset, &body)).await?;
    Ok(Json(report).into_response())
}

async fn ingest_feed(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let report = with_service(&state, move |s| s.ingest_feed(&body)).await?;
    spawn_delivery(&state, report.dispatches());
    Ok(Json(report).into_response())
}

async fn notify(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let signal = NodeId::new(id).map_err(ServiceError::from)?;
    let runs = with_service(&state, move |s| s.notify(&signal)).await?;
    spawn_delivery(&state, runs.iter().flat_map(|r| r.dispatches.iter().cloned()).collect());
    Ok(Json(runs).into_response())
}

async fn ingest_slice(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let result = with_service(&state, move |s| s.ingest_slice(&body)).await?;
    Ok(Json(result).into_response())
}

// ---- queries -----------------------------------------------------------

async fn blast_radius(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let signal = NodeId::new(id).map_err(ServiceError::from)?;
    let radius = with_service(&state, move |s| s.blast_radius(&signal)).await?;
    Ok(Json(radius).into_response())
}

#[derive(Debug, Default, Deserialize, Serialize)]
pub struct LeaderboardQuery {
    #[serde(default)]
    pub agg: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
    /// `asset:tier[,asset:tier...]`, evaluated without being stored.
    #[serde(default)]
    pub override_tier: Option<String>,
}

async fn leaderboard(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<LeaderboardQuery>,
) -> ApiResult<Response> {
    let org = NodeId::new(id).map_err(ServiceError::from)?;
    let mode: AggMode = q
        .agg
        .as_deref()
        .unwrap_or("sum")
        .parse()
        .map_err(ServiceError::Validation)?;
    let format: LeaderboardFormat = q
        .format
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(ServiceError::Validation)?;
    let overrides = parse_tier_overrides(q.override_tier.as_deref().unwrap_or_default())?;
    let rows = with_service(&state, move |s| s.leaderboard(&org, mode, &overrides)).await?;
    let content_type = match format {
        LeaderboardFormat::Json => "application/json",
        LeaderboardFormat::Csv => "text/csv; charset=utf-8",
    };
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, content_type.parse().expect("static header value"));
    Ok((headers, render_leaderboard(&rows, format)).into_response())
}

async fn depscores(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let asset = NodeId::new(id).map_err(ServiceError::from)?;
    let list = with_service(&state, move |s| s.depscores(&asset)).await?;
    Ok(Json(list).into_response())
}

#[derive(Debug, Deserialize)]
struct AuditQuery {
    #[serde(default)]
    limit: Option<usize>,
}

async fn audit(State(state): State<AppState>, Query(q): Query<AuditQuery>) -> ApiResult<Response> {
    let list = with_service(&state, move |s| {
        let log = s.audit_log();
        let skip = q.limit.map_or(0, |n| log.len().saturating_sub(n));
        Ok(log[skip..].to_vec())
    })
    .await?;
    Ok(Json(list).into_response())
}

// ---- policy evaluation -------------------------------------------------

async fn gate(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: GateRequest = parse_json(&body)?;
    let result = with_service(&state, move |s| s.gate(&req)).await?;
    Ok(Json(result).into_response())
}

async fn dry_run(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: DryRunRequest = if body.is_empty() {
        DryRunRequest::default()
    } else {
        parse_json(&body)?
    };
    let report = with_service(&state, move |s| s.dry_run(&id, req)).await?;
    Ok(Json(report).into_response())
}
