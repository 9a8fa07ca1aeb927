use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rckl::{LossModel, StepPolicy};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::session::{AnswerOutcome, Embedding, PendingQuery, SessionInfo, SessionSettings, SessionStats};
use crate::store::{NewSession, SessionStore};

/// Body of every 4xx/5xx response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::SessionNotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::StaleQuery { .. } => StatusCode::CONFLICT,
            ServiceError::TooFewObjects(_)
            | ServiceError::InvalidChoice { .. }
            | ServiceError::InvalidRequest(_)
            | ServiceError::Learner(rckl::Error::InvalidPolicyParam(_)) => StatusCode::BAD_REQUEST,
            ServiceError::InvalidBody(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError {
            status,
            body: ErrorBody {
                code: e.code().to_string(),
                message: e.to_string(),
            },
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError {
            status: r.status(),
            body: ErrorBody {
                code: "invalid_body".into(),
                message: r.body_text(),
            },
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                code: "invalid_request".into(),
                message: r.body_text(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ObjectSpec {
    Label(String),
    Full {
        label: String,
        #[serde(default, alias = "media")]
        media_url: Option<String>,
    },
}

/// `"pa-gnmds"`-style text or the tagged JSON form.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Text(String),
    Tagged(StepPolicy),
}

#[derive(Clone, Debug, Deserialize)]
pub struct CreateSession {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default)]
    pub model: Option<LossModel>,
    #[serde(default)]
    pub passes: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
}

impl CreateSession {
    fn into_spec(self) -> Result<NewSession, ServiceError> {
        let defaults = SessionSettings::default();
        let policy = match self.policy {
            None => defaults.policy,
            Some(PolicySpec::Text(s)) => s.parse()?,
            Some(PolicySpec::Tagged(p)) => {
                p.validate()?;
                p
            }
        };
        let passes = self.passes.unwrap_or(defaults.passes);
        if passes == 0 {
            return Err(ServiceError::InvalidRequest("passes must be at least 1".into()));
        }
        Ok(NewSession {
            objects: self
                .objects
                .into_iter()
                .map(|o| match o {
                    ObjectSpec::Label(label) => (label, None),
                    ObjectSpec::Full { label, media_url } => (label, media_url),
                })
                .collect(),
            settings: SessionSettings {
                model: self.model.unwrap_or(defaults.model),
                policy,
                passes,
                seed: self.seed.unwrap_or(defaults.seed),
                checkpoint_every: self.checkpoint_every.unwrap_or(defaults.checkpoint_every),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct AnswerBody {
    pub query_id: u64,
    pub chosen: usize,
}

#[derive(Clone, Debug, Deserialize)]
pub struct EmbeddingParams {
    #[serde(default = "two")]
    pub k: usize,
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionList {
    pub ids: Vec<String>,
}

type Store = Arc<SessionStore>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Storage(format!("worker task failed: {e}")))?
        .map_err(ApiError::from)
}

async fn list_sessions(State(store): State<Store>) -> Json<SessionList> {
    Json(SessionList { ids: store.ids() })
}

async fn create_session(
    State(store): State<Store>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let Json(req) = body?;
    let spec = req.into_spec()?;
    let id = blocking(move || store.create(spec)).await?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn session_info(State(store): State<Store>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    Ok(Json(store.info(&id)?))
}

async fn next_query(State(store): State<Store>, Path(id): Path<String>) -> ApiResult<Json<PendingQuery>> {
    Ok(Json(store.next_query(&id)?))
}

async fn submit_answer(
    State(store): State<Store>,
    Path(id): Path<String>,
    body: Result<Json<AnswerBody>, JsonRejection>,
) -> ApiResult<Json<AnswerOutcome>> {
    let Json(a) = body?;
    Ok(Json(blocking(move || store.submit_answer(&id, a.query_id, a.chosen)).await?))
}

async fn embedding(
    State(store): State<Store>,
    Path(id): Path<String>,
    params: Result<Query<EmbeddingParams>, QueryRejection>,
) -> ApiResult<Json<Embedding>> {
    let Query(p) = params?;
    Ok(Json(blocking(move || store.embedding(&id, p.k)).await?))
}

async fn stats(State(store): State<Store>, Path(id): Path<String>) -> ApiResult<Json<SessionStats>> {
    Ok(Json(blocking(move || store.stats(&id)).await?))
}

async fn kernel(State(store): State<Store>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let text = store.kernel_checkpoint(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text))
}

/// JSON API routes over `store`.
pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/query", get(next_query))
        .route("/sessions/{id}/answer", post(submit_answer))
        .route("/sessions/{id}/embedding", get(embedding))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/kernel", get(kernel))
        .with_state(store)
}

/// API routes plus, when given, static files served for every other path.
pub fn app(store: Arc<SessionStore>, static_dir: Option<PathBuf>) -> Router {
    let api = router(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
