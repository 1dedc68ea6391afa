//! `/v1` HTTP routes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use crowdgen_core::study::{Grouping, RaterModel};
use serde::Deserialize;
use serde_json::Value;

use crate::engine::{parse_json, ApplyRequest, Engine, PlanRequest, ReasonRequest, ResponseRequest, SessionRequest, WidgetsRequest};
use crate::error::ServiceError;

pub const PNG: &str = "image/png";
pub const HANDLE_HEADER: &str = "x-image-handle";
/// Carries the op JSON when the request body is a raw PNG.
pub const OP_HEADER: &str = "x-op";

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::warn!(code = self.code(), "{self}");
        }
        (status, Json(self.to_json())).into_response()
    }
}

type Shared = Arc<Engine>;
type ApiResult<T> = Result<T, ServiceError>;

/// Runs blocking engine work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(format!("worker failed: {e}")))?
}

/// Serialized once so equal payloads are equal bytes.
fn json_bytes(v: &Value) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], serde_json::to_vec(v).expect("json")).into_response()
}

async fn reason(State(e): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: ReasonRequest = parse_json(&body)?;
    let v = blocking(move || e.reason(&req)).await?;
    Ok(json_bytes(&v))
}

async fn widgets(State(e): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: WidgetsRequest = parse_json(&body)?;
    Ok(json_bytes(&e.widgets(&req)?))
}

fn wants_png(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains(PNG))
}

async fn image_apply(State(e): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let is_png = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with(PNG));
    let req = if is_png {
        let op = headers
            .get(OP_HEADER)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ServiceError::Validation(format!("raw PNG bodies need the op in the {OP_HEADER} header")))?;
        ApplyRequest {
            op: Some(parse_json(op.as_bytes())?),
            image_png_base64: Some(B64.encode(&body)),
            ..ApplyRequest::default()
        }
    } else {
        parse_json(&body)?
    };
    let png = wants_png(&headers);
    let out = blocking(move || e.apply(&req)).await?;
    if png {
        let handle = HeaderValue::from_str(&out.handle).expect("hex");
        Ok(([(header::CONTENT_TYPE, HeaderValue::from_static(PNG)), (header::HeaderName::from_static(HANDLE_HEADER), handle)], out.image.encode_png()).into_response())
    } else {
        Ok(json_bytes(&out.to_json()))
    }
}

async fn image_get(State(e): State<Shared>, Path(handle): Path<String>) -> ApiResult<Response> {
    let img = e.images.get(&handle)?;
    Ok(([(header::CONTENT_TYPE, PNG)], img.encode_png()).into_response())
}

async fn session_create(State(e): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: SessionRequest = if body.is_empty() { SessionRequest::default() } else { parse_json(&body)? };
    let s = e.create_session(&req)?;
    Ok((StatusCode::CREATED, Json(s)).into_response())
}

async fn session_get(State(e): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(e.sessions.get(&id)?).into_response())
}

async fn session_replay(State(e): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let v = blocking(move || e.replay(&id)).await?;
    Ok(Json(v).into_response())
}

async fn library_get(State(e): State<Shared>) -> Response {
    json_bytes(&e.library_summary())
}

async fn library_append(State(e): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: ResponseRequest = parse_json(&body)?;
    Ok(json_bytes(&e.append_response(&req)?))
}

async fn catalog(State(e): State<Shared>) -> Response {
    json_bytes(&e.catalog())
}

async fn study_plan(State(e): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: PlanRequest = parse_json(&body)?;
    Ok(Json(e.plan(&req)?).into_response())
}

async fn study_record(State(e): State<Shared>, body: Bytes) -> ApiResult<Response> {
    Ok(Json(e.record(&body)?).into_response())
}

async fn study_simulate(State(e): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let model: RaterModel = parse_json(&body)?;
    Ok(Json(e.simulate(&model)?).into_response())
}

#[derive(Debug, Deserialize)]
struct ResultsQuery {
    #[serde(default)]
    group_by: Option<String>,
    #[serde(default)]
    format: Option<String>,
}

async fn study_results(State(e): State<Shared>, Query(q): Query<ResultsQuery>) -> ApiResult<Response> {
    let grouping: Grouping = q
        .group_by
        .as_deref()
        .unwrap_or("aspect-pair")
        .parse()
        .map_err(ServiceError::Validation)?;
    let (json, csv) = e.results(grouping)?;
    match q.format.as_deref() {
        None | Some("json") => Ok(json_bytes(&json)),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response()),
        Some(other) => Err(ServiceError::Validation(format!("unknown format {other:?}; expected json or csv"))),
    }
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/reason", post(reason))
        .route("/v1/widgets", post(widgets))
        .route("/v1/image/apply", post(image_apply))
        .route("/v1/images/{handle}", get(image_get))
        .route("/v1/sessions", post(session_create))
        .route("/v1/sessions/{id}", get(session_get))
        .route("/v1/sessions/{id}/replay", post(session_replay))
        .route("/v1/library", get(library_get))
        .route("/v1/library/responses", post(library_append))
        .route("/v1/catalog", get(catalog))
        .route("/v1/study/plan", post(study_plan))
        .route("/v1/study/record", post(study_record))
        .route("/v1/study/simulate", post(study_simulate))
        .route("/v1/study/results", get(study_results))
        .with_state(engine)
}

pub async fn serve(engine: Arc<Engine>) -> Result<(), ServiceError> {
    let addr = engine.config.listen;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
