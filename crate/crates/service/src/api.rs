//! HTTP+JSON API over the session engine.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qir_core::corpus::CorpusError;
use qir_core::qprob::{DenseMatrix, ToDense};
use qir_core::session::{HistoryEntry, LogLine, QueryMode, SessionError};
use qir_core::{Engine, InteractionEvent, SessionConfig, SessionDiagnostics, SessionState};
use serde::{Deserialize, Serialize};

use crate::config::SessionOverrides;
use crate::store::{Journal, SessionHandle, SessionStore};

pub const DEFAULT_RANK_N: usize = 10;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub defaults: SessionConfig,
    pub store: Arc<SessionStore>,
    pub journal: Option<Journal>,
    /// Largest dimension for which `/state` includes the dense operator.
    pub max_dense_dim: usize,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, defaults: SessionConfig) -> Self {
        Self {
            engine,
            defaults,
            store: Arc::new(SessionStore::new()),
            journal: None,
            max_dense_dim: qir_core::qprob::DEFAULT_DENSE_BOUND,
        }
    }

    /// Live session, or one restored from the journal after eviction.
    async fn session(&self, session_id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        if let Some(h) = self.store.get(session_id) {
            return Ok(h);
        }
        let restored = match &self.journal {
            Some(j) => j
                .load(session_id)
                .map_err(|e| ApiError::Internal(e.to_string()))?,
            None => None,
        };
        let Some((overrides, lines)) = restored else {
            return Err(ApiError::NotFound(format!(
                "unknown session {session_id:?}"
            )));
        };
        let config = overrides.resolve(&self.engine, &self.defaults)?;
        let (state, _) = qir_core::session::replay(&self.engine, session_id, config, &lines)
            .map_err(|e| ApiError::Internal(format!("journal replay failed: {e}")))?;
        tracing::info!(
            session_id,
            events = lines.len(),
            "restored session from journal"
        );
        Ok(self.store.insert(SessionHandle::new(state, overrides)))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/rank", get(rank))
        .route("/sessions/{id}/drift", get(drift))
        .route("/sessions/{id}/state", get(session_state))
        .route("/corpus/docs/{doc_id}", get(document))
        .with_state(state)
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Unprocessable(String),
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(m) => {
                tracing::error!(error = %m, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, m)
            }
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match &e {
            SessionError::Qprob(q)
                if !matches!(q, qir_core::qprob::Error::ImpossibleMeasurement { .. }) =>
            {
                ApiError::Internal(e.to_string())
            }
            SessionError::Corpus(
                CorpusError::Io(_) | CorpusError::Json(_) | CorpusError::Index(_),
            ) => ApiError::Internal(e.to_string()),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes, what: &str) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::Unprocessable(format!("invalid {what}: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
}

async fn create_session(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let overrides: SessionOverrides = if body.iter().all(u8::is_ascii_whitespace) {
        SessionOverrides::default()
    } else {
        parse_body(&body, "session overrides")?
    };
    let config = overrides.resolve(&app.engine, &app.defaults)?;
    let session_id = uuid::Uuid::new_v4().to_string();
    let state = app.engine.new_session(session_id.clone(), config)?;
    if let Some(j) = &app.journal {
        j.create(&session_id, &overrides)
            .map_err(|e| ApiError::Internal(format!("journal: {e}")))?;
    }
    app.store.insert(SessionHandle::new(state, overrides));
    tracing::info!(%session_id, "session created");
    Ok((StatusCode::CREATED, Json(CreatedSession { session_id })))
}

/// Diagnostics of one applied event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventDiagnostics {
    pub t: u64,
    pub event_probability: f64,
    pub drift_flagged: bool,
    pub ensemble_rank: usize,
    pub recovered: bool,
}

impl EventDiagnostics {
    fn new(t: u64, d: &SessionDiagnostics) -> Self {
        Self {
            t,
            event_probability: d.event_probability,
            drift_flagged: d.drift_flagged,
            ensemble_rank: d.ensemble_rank,
            recovered: d.recovered,
        }
    }
}

async fn post_event(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EventDiagnostics>, ApiError> {
    let handle = app.session(&id).await?;
    let event: InteractionEvent = parse_body(&body, "event")?;
    let mut state = handle.state.lock().await;
    let diag = app.engine.apply(&mut state, &event)?;
    let t = state.history.len() as u64 - 1;
    if let Some(j) = &app.journal {
        let line = LogLine {
            t,
            event,
            diag: Some(diag),
        };
        if let Err(e) = j.append(&id, &line) {
            tracing::error!(session_id = %id, error = %e, "journal append failed");
        }
    }
    Ok(Json(EventDiagnostics::new(t, &diag)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedResult {
    pub doc_id: String,
    pub title: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankResponse {
    pub session_id: String,
    pub results: Vec<RankedResult>,
}

fn param_usize(
    params: &HashMap<String, String>,
    key: &str,
    default: usize,
) -> Result<usize, ApiError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| {
            ApiError::Unprocessable(format!("{key} must be a non-negative integer, got {v:?}"))
        }),
    }
}

async fn rank(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<RankResponse>, ApiError> {
    let n = param_usize(&params, "n", DEFAULT_RANK_N)?;
    if n == 0 {
        return Err(ApiError::Unprocessable("n must be at least 1".into()));
    }
    let handle = app.session(&id).await?;
    let state = handle.state.lock().await;
    let corpus = app.engine.corpus();
    let results = app
        .engine
        .rank(&state, n)
        .into_iter()
        .map(|r| RankedResult {
            title: corpus
                .document(&r.doc_id)
                .map(|d| d.title.clone())
                .unwrap_or_default(),
            doc_id: r.doc_id,
            probability: r.probability,
        })
        .collect();
    Ok(Json(RankResponse {
        session_id: id,
        results,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftResponse {
    pub query: String,
    pub terms: Vec<String>,
    pub probability: f64,
    pub tau: f64,
    /// Whether submitting this query now would be flagged as drift.
    pub drift: bool,
}

async fn drift(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<DriftResponse>, ApiError> {
    let query = params
        .get("q")
        .cloned()
        .ok_or_else(|| ApiError::Unprocessable("missing query parameter q".into()))?;
    let handle = app.session(&id).await?;
    let state = handle.state.lock().await;
    let terms = app.engine.corpus().query_terms(&query);
    if terms.is_empty() {
        return Err(ApiError::Unprocessable(format!(
            "query {query:?} has no searchable term"
        )));
    }
    let probability = app.engine.drift_probability(&state, &terms)?;
    let tau = state.config.drift_threshold;
    Ok(Json(DriftResponse {
        query,
        terms,
        probability,
        tau,
        drift: probability < tau,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryItem {
    pub event: InteractionEvent,
    pub diagnostics: EventDiagnostics,
}

impl From<&HistoryEntry> for HistoryItem {
    fn from(h: &HistoryEntry) -> Self {
        Self {
            event: h.event.clone(),
            diagnostics: EventDiagnostics::new(h.t, &h.diag),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSettings {
    pub alpha_click: f64,
    pub alpha_judgment: f64,
    pub alpha_query: Option<f64>,
    pub tau: f64,
    pub query_mode: QueryMode,
    pub prf_k: usize,
    pub has_context: bool,
}

impl From<&SessionConfig> for SessionSettings {
    fn from(c: &SessionConfig) -> Self {
        Self {
            alpha_click: c.alpha_click,
            alpha_judgment: c.alpha_judgment,
            alpha_query: c.alpha_query,
            tau: c.drift_threshold,
            query_mode: c.query_mode,
            prf_k: c.prf_k,
            has_context: c.context.is_some(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateResponse {
    pub session_id: String,
    pub created_at: u64,
    pub dim: usize,
    pub ensemble_rank: usize,
    pub history_length: usize,
    pub history: Vec<HistoryItem>,
    pub last_diagnostics: Option<EventDiagnostics>,
    pub query_mode: QueryMode,
    pub config: SessionSettings,
    pub max_dense_dim: usize,
    /// Present only when `dim <= max_dense_dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<DenseMatrix>,
}

fn state_response(
    handle: &SessionHandle,
    state: &SessionState,
    max_dense_dim: usize,
) -> Result<StateResponse, ApiError> {
    let dim = state.rho.dim();
    let dense = if dim <= max_dense_dim {
        Some(
            state
                .rho
                .to_dense_bounded(max_dense_dim)
                .map_err(|e| ApiError::Internal(e.to_string()))?,
        )
    } else {
        None
    };
    let history: Vec<HistoryItem> = state.history.iter().map(HistoryItem::from).collect();
    Ok(StateResponse {
        session_id: state.session_id.clone(),
        created_at: handle.created_at,
        dim,
        ensemble_rank: state.rho.len(),
        history_length: history.len(),
        last_diagnostics: history.last().map(|h| h.diagnostics),
        history,
        query_mode: state.config.query_mode,
        config: SessionSettings::from(&state.config),
        max_dense_dim,
        dense,
    })
}

async fn session_state(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StateResponse>, ApiError> {
    let handle = app.session(&id).await?;
    let state = handle.state.lock().await;
    Ok(Json(state_response(&handle, &state, app.max_dense_dim)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocParagraph {
    pub para_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocResponse {
    pub doc_id: String,
    pub title: String,
    pub paragraphs: Vec<DocParagraph>,
}

async fn document(
    State(app): State<AppState>,
    Path(doc_id): Path<String>,
) -> Result<Json<DocResponse>, ApiError> {
    let doc = app
        .engine
        .corpus()
        .document(&doc_id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown document {doc_id:?}")))?;
    Ok(Json(DocResponse {
        doc_id: doc.doc_id.clone(),
        title: doc.title.clone(),
        paragraphs: doc
            .paragraphs
            .iter()
            .map(|p| DocParagraph {
                para_id: p.para_id.clone(),
                text: p.text.clone(),
            })
            .collect(),
    }))
}
