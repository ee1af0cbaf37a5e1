use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use mindreader_core::dataset::Sentiment;
use mindreader_core::interview::{InterviewSession, Phase};
use mindreader_core::kg::EntityId;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::state::{InterviewData, Service};
use crate::ServiceError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub token: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub batch_number: u32,
    pub answers: Vec<AnswerItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerItem {
    /// Entity uri as given in the batch payload.
    pub entity: String,
    pub sentiment: Sentiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityView {
    pub uri: String,
    pub name: String,
    pub kind: String,
    pub recommendable: bool,
    pub release_year: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalListsView {
    pub predicted_liked: Vec<EntityView>,
    pub predicted_disliked: Vec<EntityView>,
    pub extras: Vec<EntityView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub token: String,
    pub phase: Phase,
    /// Number to send with the answers to `batch`.
    pub batch_number: u32,
    pub batch: Vec<EntityView>,
    /// Like and dislike answers so far.
    pub binary_answers: usize,
    /// Binary answers needed before the final lists.
    pub threshold: usize,
    pub final_lists: Option<FinalListsView>,
    pub truncated: bool,
}

impl SessionView {
    pub(crate) fn build(data: &InterviewData, s: &InterviewSession) -> SessionView {
        let graph = data.engine.graph();
        let entity = |&id: &EntityId| {
            let e = &graph.entities()[id.index()];
            EntityView {
                uri: e.uri.clone(),
                name: e.name.clone(),
                kind: e.kind.as_str().to_string(),
                recommendable: e.recommendable,
                release_year: data.popularity.get(id).map(|m| m.release_year),
            }
        };
        let list = |ids: &[EntityId]| ids.iter().map(entity).collect::<Vec<_>>();
        SessionView {
            session_id: s.session_id.clone(),
            token: s.token.clone(),
            phase: s.phase,
            batch_number: s.batch_number,
            batch: list(&s.pending_batch),
            binary_answers: s.binary_count(),
            threshold: data.engine.config().exploration_threshold,
            final_lists: s.final_lists.as_ref().map(|f| FinalListsView {
                predicted_liked: list(&f.predicted_liked),
                predicted_disliked: list(&f.predicted_disliked),
                extras: list(&f.extras),
            }),
            truncated: s.truncated,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            log::error!("{self}");
        }
        (self.status(), Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

fn parse<T: serde::de::DeserializeOwned + Default>(body: &[u8]) -> Result<T, ServiceError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

async fn create_session(State(svc): State<Service>, body: Bytes) -> Result<Json<SessionView>, ServiceError> {
    let req: CreateSessionRequest = parse(&body)?;
    svc.create_session(req.token).await.map(Json)
}

async fn get_session(State(svc): State<Service>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    svc.get_session(&id).await.map(Json)
}

async fn post_answers(
    State(svc): State<Service>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ServiceError> {
    let req: AnswerRequest = serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    svc.submit(&id, req).await.map(Json)
}

#[derive(Deserialize)]
struct ExportQuery {
    since: Option<String>,
}

async fn export(State(svc): State<Service>, Query(q): Query<ExportQuery>) -> Result<Response, ServiceError> {
    let since = q
        .since
        .map(|s| {
            DateTime::parse_from_rfc3339(&s)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| ServiceError::BadRequest(format!("since: {e}")))
        })
        .transpose()?;
    let body = svc.export_csv(since)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response())
}

pub fn router(service: Service) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(post_answers))
        .route("/export", get(export));
    let static_dir = service.config().static_dir.clone();
    let app = Router::new().nest("/api", api).with_state(service);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}
