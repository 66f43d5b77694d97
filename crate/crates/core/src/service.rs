//! HTTP front door: session lifecycle, message and parameter endpoints, artifact
//! retrieval and a server-sent event stream per session.
//!
//! Every state-changing request goes through the session's queue, so requests for one
//! session are applied in arrival order while different sessions proceed independently.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

use crate::agents::{ChatTurn, FinalVariant, LiveBackend, LlmBackend};
use crate::compilesvc::Compiler;
use crate::geometry::{Shape, ShapeId};
use crate::params::{ParamSet, ParamSpec, ParamUpdate};
use crate::pdl::Diagnostic;
use crate::pipeline::{
    Command, Counters, DesignSpec, PromptSet, Scenario, Session, SessionConfig, SessionError, SessionEvent,
    SessionHandle, SessionStatus,
};

/// How the service creates sessions.
#[derive(Clone)]
pub struct ServiceConfig {
    /// Journals go to `<data_dir>/<session id>/journal.jsonl` when set.
    pub data_dir: Option<PathBuf>,
    /// Where scripted fixtures (`<name>.json` scenarios) are looked up.
    pub fixtures_dir: PathBuf,
    pub compiler: Arc<dyn Compiler>,
    pub prompts: Arc<PromptSet>,
    /// Defaults for live sessions.
    pub session: SessionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Live,
    Scripted,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub backend: BackendChoice,
    #[serde(default)]
    pub fixture: Option<String>,
    #[serde(default)]
    pub final_prompt_variant: Option<FinalVariant>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageBody {
    pub text: String,
    #[serde(default)]
    pub updates: Vec<ParamUpdate>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfirmBody {
    pub name: String,
    pub accept: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeBody {
    pub shape: Shape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneShape {
    pub id: ShapeId,
    pub shape: Shape,
}

/// `GET /sessions/{id}` body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    /// Unix seconds.
    pub created: u64,
    pub backend: BackendChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    pub state: SessionStatus,
    pub seed: u64,
    pub params: ParamSet,
    pub proposals: Vec<ParamSpec>,
    pub design: Option<DesignSpec>,
    pub transcript: Vec<ChatTurn>,
    pub methods: Vec<String>,
    pub counters: Counters,
    pub last_seq: u64,
    pub scene: Vec<SceneShape>,
    /// Generation and digest of the current artifact, if any.
    pub artifact: Option<ArtifactInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactInfo {
    pub generation: u64,
    pub digest: String,
    pub shapes: usize,
}

/// Every error body: `{code, message, diagnostics}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "E_UNKNOWN_SESSION", format!("no session `{id}`"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "E_INVALID_REQUEST", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::IllegalState { .. } => Self::new(StatusCode::CONFLICT, "E_ILLEGAL_STATE", e.to_string()),
            SessionError::Rejected {
                code,
                message,
                diagnostics,
            } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY.as_u16(),
                code,
                message,
                diagnostics,
            },
            SessionError::Closed => Self::new(StatusCode::SERVICE_UNAVAILABLE, "E_SESSION_CLOSED", e.to_string()),
        }
    }
}

/// `Json` whose rejections use the API error shape.
struct Body<T>(T);

impl<S: Send + Sync, T: serde::de::DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let Json(v) = Json::<T>::from_request(req, state)
            .await
            .map_err(|e| ApiError::invalid(e.body_text()))?;
        Ok(Body(v))
    }
}

/// `Query` whose rejections use the API error shape.
struct Params<T>(T);

impl<S: Send + Sync, T: serde::de::DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        let Query(v) = Query::<T>::from_request_parts(parts, state)
            .await
            .map_err(|e| ApiError::invalid(e.body_text()))?;
        Ok(Params(v))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct ApiSession {
    created: u64,
    backend: BackendChoice,
    fixture: Option<String>,
    handle: SessionHandle,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    sessions: Arc<RwLock<HashMap<String, Arc<ApiSession>>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            config: Arc::new(config),
            sessions: Arc::default(),
        }
    }

    fn session(&self, id: &str) -> ApiResult<Arc<ApiSession>> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    /// Handle of a running session, for in-process callers.
    pub fn handle(&self, id: &str) -> Option<SessionHandle> {
        self.session(id).ok().map(|s| s.handle.clone())
    }
}

fn valid_fixture_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn view(id: &str, s: &ApiSession) -> SessionView {
    let snap = s.handle.snapshot();
    SessionView {
        id: id.to_string(),
        created: s.created,
        backend: s.backend,
        fixture: s.fixture.clone(),
        state: snap.status,
        seed: snap.seed,
        params: snap.params,
        proposals: snap.proposals,
        design: snap.design,
        transcript: snap.transcript,
        methods: snap.methods,
        counters: snap.counters,
        last_seq: snap.last_seq,
        scene: snap.scene.into_iter().map(|(id, shape)| SceneShape { id, shape }).collect(),
        artifact: snap.artifact.map(|a| ArtifactInfo {
            generation: a.generation,
            digest: a.digest.clone(),
            shapes: a.meshes.len(),
        }),
    }
}

async fn create_session(State(app): State<AppState>, Body(body): Body<CreateSession>) -> ApiResult<Response> {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let cfg = &app.config;
    let (backend, mut config, seed): (Arc<dyn LlmBackend>, SessionConfig, u64) = match (body.backend, &body.fixture) {
        (BackendChoice::Scripted, Some(name)) => {
            if !valid_fixture_name(name) {
                return Err(ApiError::invalid(format!("invalid fixture name `{name}`")));
            }
            let path = cfg.fixtures_dir.join(format!("{name}.json"));
            let scenario = Scenario::load(&path).map_err(|e| {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "E_UNKNOWN_FIXTURE", e.to_string())
            })?;
            (Arc::new(scenario.backend()), scenario.config.clone(), scenario.seed)
        }
        (BackendChoice::Scripted, None) => return Err(ApiError::invalid("scripted sessions need a fixture")),
        (BackendChoice::Live, Some(_)) => return Err(ApiError::invalid("live sessions do not take a fixture")),
        (BackendChoice::Live, None) => {
            let live = LiveBackend::from_env()
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "E_BACKEND_CONFIG", e.to_string()))?;
            (Arc::new(live), cfg.session.clone(), rand::random())
        }
    };
    if let Some(v) = body.final_prompt_variant {
        config.final_variant = v;
    }
    let journal = match &cfg.data_dir {
        Some(dir) => {
            let dir = dir.join(&id);
            std::fs::create_dir_all(&dir).map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "E_DATA_DIR", format!("{}: {e}", dir.display()))
            })?;
            Some(dir.join("journal.jsonl"))
        }
        None => None,
    };
    let session = Session::new(id.clone(), config, seed, backend, cfg.compiler.clone(), cfg.prompts.clone());
    let api = Arc::new(ApiSession {
        created: now(),
        backend: body.backend,
        fixture: body.fixture.clone(),
        handle: SessionHandle::spawn(session, journal),
    });
    app.sessions.write().expect("sessions lock").insert(id.clone(), api.clone());
    tracing::info!(session = %id, backend = ?body.backend, "session created");
    Ok((StatusCode::CREATED, Json(view(&id, &api))).into_response())
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let s = app.session(&id)?;
    Ok(Json(view(&id, &s)))
}

async fn run(app: &AppState, id: &str, command: Command) -> ApiResult<Json<SessionView>> {
    let s = app.session(id)?;
    s.handle.apply(command).await?;
    Ok(Json(view(id, &s)))
}

async fn post_message(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Body(body): Body<MessageBody>,
) -> ApiResult<Json<SessionView>> {
    run(
        &app,
        &id,
        Command::Message {
            text: body.text,
            updates: body.updates,
        },
    )
    .await
}

async fn post_params(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Body(update): Body<ParamUpdate>,
) -> ApiResult<Json<SessionView>> {
    run(&app, &id, Command::UpdateParam { update }).await
}

async fn post_confirm(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Body(body): Body<ConfirmBody>,
) -> ApiResult<Json<SessionView>> {
    run(
        &app,
        &id,
        Command::Confirm {
            name: body.name,
            accept: body.accept,
        },
    )
    .await
}

async fn post_shape(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Body(body): Body<ShapeBody>,
) -> ApiResult<Response> {
    let s = app.session(&id)?;
    let shape_id = s.handle.add_shape(body.shape.clone()).await?;
    Ok((
        StatusCode::CREATED,
        Json(SceneShape {
            id: shape_id,
            shape: body.shape,
        }),
    )
        .into_response())
}

async fn get_shapes(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<SceneShape>>> {
    let s = app.session(&id)?;
    Ok(Json(view(&id, &s).scene))
}

#[derive(Debug, Deserialize)]
struct ArtifactQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn get_artifact(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Params(q): Params<ArtifactQuery>,
) -> ApiResult<Response> {
    let s = app.session(&id)?;
    let artifact = s
        .handle
        .snapshot()
        .artifact
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "E_NO_ARTIFACT", "no artifact has been produced yet"))?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(([(header::CONTENT_TYPE, "application/json")], artifact.to_json()).into_response()),
        "obj" => Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], artifact.to_obj()).into_response()),
        other => Err(ApiError::invalid(format!("unknown artifact format `{other}`; use json or obj"))),
    }
}

async fn get_journal(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = app.session(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], s.handle.journal()).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: Option<u64>,
}

fn sse_event(e: &SessionEvent) -> Event {
    Event::default()
        .id(e.seq.to_string())
        .event(e.payload.name())
        .data(serde_json::to_string(e).expect("event serializes"))
}

/// Events from `from` on: the stored history first, then live ones. A subscriber that
/// falls behind the broadcast buffer is caught up from the history.
fn event_stream(handle: SessionHandle, from: u64) -> impl Stream<Item = SessionEvent> {
    let (past, rx) = handle.subscribe(from);
    let next = past.last().map(|e| e.seq + 1).unwrap_or(from);
    stream::unfold(
        (handle, rx, std::collections::VecDeque::from(past), next),
        |(handle, mut rx, mut queue, mut next)| async move {
            loop {
                if let Some(e) = queue.pop_front() {
                    next = e.seq + 1;
                    return Some((e, (handle, rx, queue, next)));
                }
                match rx.recv().await {
                    Ok(e) if e.seq < next => continue,
                    Ok(e) => queue.push_back(e),
                    Err(broadcast::error::RecvError::Lagged(_)) => {
                        let (past, fresh) = handle.subscribe(next);
                        rx = fresh;
                        queue.extend(past);
                    }
                    Err(broadcast::error::RecvError::Closed) => return None,
                }
            }
        },
    )
}

async fn get_events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Params(q): Params<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let s = app.session(&id)?;
    // A reconnecting browser sends the last id it saw.
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|seq| seq + 1);
    let from = q.from.or(resume).unwrap_or(1);
    let stream = event_stream(s.handle.clone(), from).map(|e| Ok(sse_event(&e)));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "E_NOT_FOUND", "no such endpoint")
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/message", post(post_message))
        .route("/sessions/{id}/params", post(post_params))
        .route("/sessions/{id}/confirm", post(post_confirm))
        .route("/sessions/{id}/shapes", get(get_shapes).post(post_shape))
        .route("/sessions/{id}/artifact", get(get_artifact))
        .route("/sessions/{id}/journal", get(get_journal))
        .route("/sessions/{id}/events", get(get_events))
        .fallback(fallback)
        .with_state(app)
}

/// Serves on `listener` until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(config))).await
}

/// A running service, for tests and embedding.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    pub state: AppState,
    task: tokio::task::JoinHandle<()>,
}

impl ServiceHandle {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn shutdown(self) {
        self.task.abort();
    }
}

pub async fn spawn_service(addr: &str, config: ServiceConfig) -> std::io::Result<ServiceHandle> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let state = AppState::new(config);
    let app = router(state.clone());
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "service stopped");
        }
    });
    Ok(ServiceHandle { addr, state, task })
}
