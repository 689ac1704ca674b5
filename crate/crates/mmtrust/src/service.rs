//! HTTP session service.
//!
//! Sessions live in memory and, when a data directory is configured, as one
//! append-only JSONL log per session. Every committed request is appended to
//! the log before the in-memory session is advanced, so a restart (or the
//! `replay` command) rebuilds exactly the state clients last saw.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mmtrust_core::scenario::{shipped_scenario, SHIPPED_SCENARIOS};
use mmtrust_core::session::{append_log, read_log, replay, session_step, LogEntry, MuirResponses, Session, SessionRequest, SessionResponse};
use mmtrust_core::{Decision, Error, Observation, Scenario};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

struct Slot {
    session: Session,
    log: Vec<LogEntry>,
}

/// Shared service state: the session table and the optional log directory.
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    data_dir: Option<PathBuf>,
}

impl AppState {
    pub fn in_memory() -> Self {
        AppState {
            sessions: RwLock::new(HashMap::new()),
            data_dir: None,
        }
    }

    /// Opens `dir` (creating it if needed) and replays every `*.jsonl` log
    /// found there.
    pub fn with_data_dir(dir: impl Into<PathBuf>) -> Result<Self, Error> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let log = read_log(&path)?;
            let session = replay(&log).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let id = session.state().session_id.clone();
            tracing::info!(session = %id, entries = log.len(), "restored session");
            sessions.insert(id, Arc::new(Mutex::new(Slot { session, log })));
        }
        Ok(AppState {
            sessions: RwLock::new(sessions),
            data_dir: Some(dir),
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session table poisoned").len()
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| log_path(d, id))
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

/// Log file of session `id` inside `dir`.
pub fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(read_session))
        .route("/sessions/{id}/log", get(read_session_log))
        .route("/sessions/{id}/observe", post(observe))
        .route("/sessions/{id}/whatif", post(whatif))
        .route("/sessions/{id}/report", post(report))
        .route("/sessions/{id}/decision", post(decide))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": "validation", "message": message.into() }),
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            body: json!({ "error": "not_found", "message": format!("unknown session '{id}'") }),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match &e {
            Error::Contradiction => (StatusCode::CONFLICT, "contradiction"),
            Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
            _ => (StatusCode::BAD_REQUEST, "validation"),
        };
        let mut body = json!({ "error": kind, "message": e.to_string() });
        if let Error::Validation { path, .. } = &e {
            body["path"] = json!(path);
        }
        ApiError { status, body }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Serialize)]
struct ModelCard {
    id: String,
    description: String,
    weight: f64,
}

#[derive(Serialize)]
struct ScenarioListing {
    name: String,
    narrative: String,
    models: Vec<ModelCard>,
}

async fn list_scenarios() -> Result<Json<Vec<ScenarioListing>>, ApiError> {
    let mut out = Vec::new();
    for (name, _) in SHIPPED_SCENARIOS {
        let s = shipped_scenario(name).expect("listed fixture")?;
        let models = s
            .ensemble
            .ids()
            .zip(&s.descriptions)
            .zip(s.ensemble.weights())
            .map(|((id, description), weight)| ModelCard {
                id: id.to_string(),
                description: description.clone(),
                weight: *weight,
            })
            .collect();
        out.push(ScenarioListing {
            name: s.name.clone(),
            narrative: s.narrative.clone(),
            models,
        });
    }
    Ok(Json(out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    #[serde(default)]
    scenario_name: Option<String>,
    #[serde(default)]
    scenario: Option<serde_json::Value>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateBody = parse(&body)?;
    let scenario = match (request.scenario_name, request.scenario) {
        (Some(name), None) => shipped_scenario(&name).ok_or_else(|| ApiError::bad_request(format!("unknown scenario '{name}'")))??,
        (None, Some(doc)) => mmtrust_core::load_scenario(&doc.to_string())?,
        _ => return Err(ApiError::bad_request("provide exactly one of scenario_name or scenario")),
    };
    let id = uuid::Uuid::new_v4().to_string();
    let session = Session::open(id.clone(), Arc::new(scenario))?;
    let open = session.open_entry();
    if let Some(path) = app.log_path(&id) {
        append_log(&path, &open)?;
    }
    let state = session.state().clone();
    app.sessions.write().expect("session table poisoned").insert(
        id.clone(),
        Arc::new(Mutex::new(Slot {
            session,
            log: vec![open],
        })),
    );
    tracing::info!(session = %id, scenario = %state.scenario_name, "opened session");
    Ok((StatusCode::OK, Json(json!({ "session_id": id, "state": state }))).into_response())
}

async fn read_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    run(&app, &id, SessionRequest::Read).await
}

async fn read_session_log(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Vec<LogEntry>>, ApiError> {
    let slot = app.slot(&id)?;
    let slot = slot.lock().await;
    Ok(Json(slot.log.clone()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObserveBody {
    observation: Observation,
    #[serde(default)]
    action_id: Option<String>,
}

async fn observe(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: ObserveBody = parse(&body)?;
    run(
        &app,
        &id,
        SessionRequest::Observe {
            observation: b.observation,
            action_id: b.action_id,
        },
    )
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfBody {
    observation: Observation,
}

async fn whatif(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: WhatIfBody = parse(&body)?;
    run(&app, &id, SessionRequest::WhatIf { observation: b.observation }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportBody {
    competence: f64,
    predictability: f64,
    reliability: f64,
    faith: f64,
    overall: f64,
    #[serde(default)]
    action_id: Option<String>,
}

async fn report(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: ReportBody = parse(&body)?;
    let responses = MuirResponses {
        competence: b.competence,
        predictability: b.predictability,
        reliability: b.reliability,
        faith: b.faith,
        overall: b.overall,
    };
    run(
        &app,
        &id,
        SessionRequest::Report {
            responses,
            action_id: b.action_id,
        },
    )
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    choice: Decision,
    #[serde(default)]
    action_id: Option<String>,
}

async fn decide(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: DecisionBody = parse(&body)?;
    run(
        &app,
        &id,
        SessionRequest::Decide {
            choice: b.choice,
            action_id: b.action_id,
        },
    )
    .await
}

/// Runs one request under the session's lock, persisting the committed
/// entry before the new state becomes visible.
async fn run(app: &AppState, id: &str, request: SessionRequest) -> Result<Response, ApiError> {
    let slot = app.slot(id)?;
    let mut slot = slot.lock().await;
    let (next, response, entry) = session_step(&slot.session, request)?;
    if let Some(entry) = entry {
        if let Some(path) = app.log_path(id) {
            append_log(&path, &entry)?;
        }
        slot.log.push(entry);
        slot.session = next;
    }
    Ok(match response {
        SessionResponse::State(state) => Json(json!({ "session_id": id, "state": state })).into_response(),
        SessionResponse::Projection(projection) => Json(json!({ "session_id": id, "projection": projection })).into_response(),
        SessionResponse::Report { entry, state } => Json(json!({ "session_id": id, "report": entry, "state": state })).into_response(),
    })
}

/// Loads a scenario document from a path, or a shipped fixture by name.
pub fn resolve_scenario(spec: &str) -> Result<Scenario, Error> {
    if let Some(found) = shipped_scenario(spec) {
        return found;
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Error::Io(format!("{spec}: {e}")))?;
    mmtrust_core::load_scenario(&text)
}
