//! HTTP front end of the rating interview.
//!
//! Routes (all JSON unless noted):
//!
//! * `POST /api/sessions` opens or resumes a session for a token.
//! * `GET /api/sessions/{id}` returns the session's current view.
//! * `POST /api/sessions/{id}/answers` answers the pending batch.
//! * `GET /api/export?since=` streams collected ratings as CSV.
//!
//! Payloads are documented in `docs/api.md`. Session endpoints answer 503 until
//! [`Service::install`] has been given the interview data; export works from
//! the log alone.

mod api;
mod journal;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::http::StatusCode;
use thiserror::Error;

pub use api::{router, AnswerRequest, AnswerItem, CreateSessionRequest, EntityView, FinalListsView, SessionView};
pub use journal::{LoggedAnswer, Record};
pub use state::{InterviewData, Service};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Directory holding the answer log.
    pub data_dir: PathBuf,
    /// Built UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("interview data is still loading")]
    NotReady,
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("{0}")]
    Conflict(String),
    #[error("session is done")]
    Gone,
    #[error("{0}")]
    BadRequest(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotReady => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Gone => StatusCode::GONE,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Storage(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, service: Service) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
