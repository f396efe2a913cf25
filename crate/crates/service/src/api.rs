//! HTTP routes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::engine::{config_hash, AlignRequest, CalibrateRequest, Engine};
use crate::error::ServiceError;
use crate::jobs::JobRegistry;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub jobs: JobRegistry,
}

impl AppState {
    pub fn new(engine: Engine, workers: usize) -> Self {
        AppState {
            engine: Arc::new(engine),
            jobs: JobRegistry::new(workers),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(scenarios))
        .route("/align", post(align))
        .route("/calibrate", post(calibrate))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(job))
        .route("/spec", get(spec))
        .with_state(state)
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        use tempalign::Error as E;
        let (status, problems) = match &self {
            ServiceError::Invalid(p) => (StatusCode::UNPROCESSABLE_ENTITY, p.clone()),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, Vec::new()),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, Vec::new()),
            ServiceError::Unavailable(_) => (StatusCode::CONFLICT, Vec::new()),
            ServiceError::Core(E::Config(_) | E::Domain(_) | E::NotRepresented(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, Vec::new())
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, Vec::new()),
        };
        let body = json!({ "error": self.to_string(), "problems": problems });
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioQuery {
    #[serde(default)]
    schema: Option<String>,
}

async fn scenarios(
    State(st): State<AppState>,
    q: Result<Query<ScenarioQuery>, QueryRejection>,
) -> Result<Response, ServiceError> {
    let Query(q) = q.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let mut list = st.engine.scenario_catalog();
    if let Some(mode) = &q.schema {
        list.retain(|s| {
            serde_json::to_value(s.schema)
                .ok()
                .and_then(|v| v.as_str().map(|m| m.eq_ignore_ascii_case(mode)))
                .unwrap_or(false)
        });
    }
    Ok(Json(list).into_response())
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    if body.is_empty() {
        return serde_json::from_slice(b"{}").map_err(|e| ServiceError::BadRequest(e.to_string()));
    }
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("malformed JSON: {e}")))?;
    serde_json::from_value(value).map_err(|e| ServiceError::Invalid(vec![e.to_string()]))
}

async fn align(State(st): State<AppState>, body: Bytes) -> Result<Response, ServiceError> {
    let req: AlignRequest = parse(&body)?;
    st.engine.check_align(&req)?;
    let engine = st.engine.clone();
    let resp = tokio::task::spawn_blocking(move || engine.align(&req))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(resp).into_response())
}

async fn calibrate(State(st): State<AppState>, body: Bytes) -> Result<Response, ServiceError> {
    let req: CalibrateRequest = parse(&body)?;
    st.engine.check_calibrate(&req)?;
    let hash = config_hash(&req);
    let engine = st.engine.clone();
    let (job, _) = st.jobs.submit("calibrate", &hash, move |h| {
        let (chain, outcome) = engine.calibrate(&req, |f| h.progress(f))?;
        engine.add_chain(chain);
        Ok(serde_json::to_value(outcome).expect("serializable"))
    });
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn job(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let j = st
        .jobs
        .get(&id)
        .ok_or_else(|| ServiceError::NotFound(format!("job '{id}'")))?;
    Ok(Json(j).into_response())
}

async fn list_jobs(State(st): State<AppState>) -> Response {
    Json(st.jobs.list()).into_response()
}

async fn spec() -> Response {
    Json(crate::openapi::document()).into_response()
}
