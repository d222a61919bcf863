//! HTTP JSON API over sessions, personas and corpus statistics.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use persona_core::curation::Prevalence;
use persona_core::generate::{GenerateError, PersonaCard, PersonaStore};
use persona_core::index::SharedIndex;
use persona_core::session::{FailureKind, SessionError, SessionManager, SessionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    ProviderDown,
    NoEvidence,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
    /// Overrides the code's default status (409 for a turn already in flight).
    #[serde(skip)]
    pub status: Option<StatusCode>,
}

const SECRET_VARS: [&str; 2] = ["PERSONA_LLM_API_KEY", "PERSONA_EMBED_API_KEY"];

/// Removes any configured provider key from text bound for a client.
pub fn redact(message: &str) -> String {
    SECRET_VARS.iter().fold(message.to_string(), |msg, var| match std::env::var(var) {
        Ok(secret) if secret.len() >= 4 => msg.replace(&secret, "[redacted]"),
        _ => msg,
    })
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl AsRef<str>) -> Self {
        Self {
            code,
            message: redact(message.as_ref()),
            detail: None,
            status: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn status(&self) -> StatusCode {
        self.status.unwrap_or(match self.code {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::ProviderDown => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::NoEvidence => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            log::error!("internal error: {}", self.message);
        }
        (self.status(), Json(self)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match &e {
            SessionError::NotFound(id) => {
                ApiError::new(ErrorCode::NotFound, e.to_string()).with_detail(json!({ "session_id": id }))
            }
            SessionError::Busy(id) => ApiError {
                status: Some(StatusCode::CONFLICT),
                ..ApiError::new(ErrorCode::BadRequest, e.to_string()).with_detail(json!({ "session_id": id, "reason": "turn_in_flight" }))
            },
            SessionError::EmptyTurn => ApiError::new(ErrorCode::BadRequest, e.to_string()),
            SessionError::Io { .. } | SessionError::CorruptLog { .. } => ApiError::new(ErrorCode::Internal, e.to_string()),
        }
    }
}

impl From<GenerateError> for ApiError {
    fn from(e: GenerateError) -> Self {
        let code = match &e {
            GenerateError::NoEvidence(_) => ErrorCode::NoEvidence,
            GenerateError::ProviderUnavailable(_) => ErrorCode::ProviderDown,
            GenerateError::InvalidContext(_) => ErrorCode::BadRequest,
            _ => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

fn failure_code(kind: FailureKind) -> ErrorCode {
    match kind {
        FailureKind::NoEvidence => ErrorCode::NoEvidence,
        FailureKind::ProviderDown => ErrorCode::ProviderDown,
        FailureKind::Grounding | FailureKind::Internal => ErrorCode::Internal,
    }
}

#[derive(Clone)]
pub struct AppState {
    pub sessions: Arc<SessionManager>,
    pub personas: PersonaStore,
    pub index: SharedIndex,
    pub prevalence: Arc<Prevalence>,
    pub provider_ids: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct TurnRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TurnResponse {
    pub reply: String,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona_card: Option<PersonaCard>,
    /// Present when a generation turn produced no persona.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

pub fn router(state: AppState, cors_origin: Option<&str>) -> Result<Router, String> {
    let mut app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/personas/{id}", get(get_persona))
        .route("/personas/{id}/card", get(get_card))
        .route("/stats/prevalence", get(get_prevalence))
        .route("/healthz", get(healthz))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such route") })
        .with_state(state);
    if let Some(origin) = cors_origin {
        let origin: HeaderValue = origin.parse().map_err(|_| format!("invalid CORS origin {origin:?}"))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, format!("worker failed: {e}")))?
}

async fn create_session(State(st): State<AppState>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let id = blocking(move || Ok(st.sessions.create()?)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = blocking(move || Ok(st.sessions.session(&id)?)).await?;
    Ok(Json(session).into_response())
}

async fn post_turn(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<TurnRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<TurnResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(ErrorCode::BadRequest, e.body_text()))?;
    let outcome = blocking(move || Ok(st.sessions.turn(&id, &req.text)?)).await?;
    Ok(Json(TurnResponse {
        reply: outcome.reply,
        state: outcome.state,
        persona_card: outcome.persona_card,
        error: outcome.failure.map(|f| ApiError::new(failure_code(f.kind), f.message)),
    }))
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

async fn get_persona(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let lookup = id.clone();
    match blocking(move || Ok(st.personas.persona_bytes(&lookup)?)).await? {
        Some(bytes) => Ok(json_bytes(bytes)),
        None => Err(ApiError::new(ErrorCode::NotFound, format!("unknown persona {id}")).with_detail(json!({ "persona_id": id }))),
    }
}

async fn get_card(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let lookup = id.clone();
    match blocking(move || Ok(st.personas.card_bytes(&lookup)?)).await? {
        Some(bytes) => Ok(json_bytes(bytes)),
        None => Err(ApiError::new(ErrorCode::NotFound, format!("unknown persona {id}")).with_detail(json!({ "persona_id": id }))),
    }
}

async fn get_prevalence(State(st): State<AppState>) -> Json<Prevalence> {
    Json((*st.prevalence).clone())
}

async fn healthz(State(st): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "index_count": st.index.snapshot().len(),
        "provider_ids": st.provider_ids,
    }))
}
