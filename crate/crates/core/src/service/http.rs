// SPDX-License-Identifier: MIT OR Apache-2.0

//! axum routes under `/v1/`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;

use super::{
    ApiError, ApiResult, CreateSession, ErrorCode, ImpactRequest, Service, SteeringRequest,
};

type Shared = State<Arc<Service>>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/info", get(info))
        .route("/v1/samples", get(samples))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/components", get(components))
        .route("/v1/sessions/{id}/steering", put(steering))
        .route("/v1/sessions/{id}/reset", post(reset))
        .route("/v1/sessions/{id}/dose_response", get(dose_response))
        .route("/v1/sessions/{id}/impact", post(impact))
        .route("/v1/assets/{*asset_ref}", get(asset))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such endpoint") })
        .with_state(service)
}

/// Serves until ctrl-c. History logs are flushed on every write, so nothing
/// is pending at shutdown.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(ErrorCode::InvalidRequest, e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::new(ErrorCode::InvalidRequest, e.body_text()))
}

fn reply<T: serde::Serialize>(r: ApiResult<T>) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn info(State(s): Shared) -> Response {
    Json(s.info()).into_response()
}

async fn samples(State(s): Shared) -> Response {
    Json(s.list_samples()).into_response()
}

async fn create_session(
    State(s): Shared,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Response {
    reply(body(payload).and_then(|req| s.create_session(&req)))
}

async fn get_session(State(s): Shared, Path(id): Path<String>) -> Response {
    reply(s.get_session(&id))
}

#[derive(Debug, Deserialize)]
struct ComponentsQuery {
    target: Option<String>,
    limit: Option<usize>,
}

async fn components(
    State(s): Shared,
    Path(id): Path<String>,
    q: Result<Query<ComponentsQuery>, QueryRejection>,
) -> Response {
    reply(query(q).and_then(|q| s.components(&id, q.target.as_deref(), q.limit)))
}

async fn steering(
    State(s): Shared,
    Path(id): Path<String>,
    payload: Result<Json<SteeringRequest>, JsonRejection>,
) -> Response {
    reply(body(payload).and_then(|req| s.apply_steering(&id, &req.modifications)))
}

async fn reset(State(s): Shared, Path(id): Path<String>) -> Response {
    reply(s.reset_session(&id))
}

#[derive(Debug, Deserialize)]
struct DoseQuery {
    component: usize,
    steps: Option<usize>,
}

async fn dose_response(
    State(s): Shared,
    Path(id): Path<String>,
    q: Result<Query<DoseQuery>, QueryRejection>,
) -> Response {
    reply(query(q).and_then(|q| s.dose_response(&id, q.component, q.steps)))
}

async fn impact(
    State(s): Shared,
    Path(id): Path<String>,
    payload: Result<Json<ImpactRequest>, JsonRejection>,
) -> Response {
    reply(body(payload).and_then(|req| s.impact(&id, &req.eval_set)))
}

async fn asset(State(s): Shared, Path(asset_ref): Path<String>) -> Response {
    match s.asset(&asset_ref) {
        Ok((bytes, mime)) => ([(header::CONTENT_TYPE, mime)], bytes).into_response(),
        Err(e) => e.into_response(),
    }
}
