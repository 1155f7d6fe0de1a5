//! Local HTTP service for live sessions: session control, clip upload,
//! inference against stored models and session export.
//!
//! Every 2xx response is issued only after its effect is on disk, so a
//! restarted service resumes each session from its event log.

mod error;
mod store;

pub use error::ApiError;
pub use store::{content_id, is_safe_id, SessionMeta, Store};

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use aktivtalk_core::audio_io::decode_wav;
use aktivtalk_core::classifier::{argmax_severe, decode_model, forward, Task};
use aktivtalk_core::dsp::extract_features;
use aktivtalk_core::session::{
    records_csv, records_json, AssessmentRecord, Feedback, Phase, Session, SessionConfig, SessionEvent,
    SessionState, TimedEvent,
};

pub const DEFAULT_PORT: u16 = 7878;
pub const DATA_DIR_ENV: &str = "AKTV_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "aktv-data";
/// Allowed deviation of an uploaded clip from the configured length.
pub const CLIP_TOLERANCE_S: f64 = 2.0;
const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

/// Storage root from `AKTV_DATA_DIR`, else `./aktv-data`.
pub fn data_dir_from_env() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
}

fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

struct LiveSession {
    meta: SessionMeta,
    session: Session,
    clips: BTreeMap<String, PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    store: Store,
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<LiveSession>>>>>,
}

impl AppState {
    /// Open the store and replay every persisted session.
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let store = Store::open(root)?;
        let (loaded, broken) = store.load_sessions()?;
        for (id, reason) in broken {
            tracing::warn!(session = %id, %reason, "skipping session that does not replay");
        }
        let mut sessions = HashMap::new();
        for (meta, session) in loaded {
            let clips = store.clips(&meta.session_id)?;
            let id = meta.session_id.clone();
            sessions.insert(id, Arc::new(Mutex::new(LiveSession { meta, session, clips })));
        }
        tracing::info!(root = %store.root().display(), sessions = sessions.len(), "store opened");
        Ok(Self {
            store,
            sessions: Arc::new(RwLock::new(sessions)),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/clips", post(post_clip))
        .route("/sessions/{id}/export", get(export_session))
        .route("/models", get(list_models))
        .route("/infer", post(infer))
        .layer(axum::extract::DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Bind and serve until the process is stopped. `on_bound` receives the
/// actual address (useful with port 0).
pub async fn serve(state: AppState, addr: SocketAddr, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub state: Phase,
    pub cycle_index: u32,
    pub snapshot: SessionState,
    pub config: SessionConfig,
    pub records: Vec<AssessmentRecord>,
}

impl SessionView {
    fn of(live: &LiveSession) -> Self {
        Self {
            session_id: live.meta.session_id.clone(),
            state: live.session.state.phase,
            cycle_index: live.session.state.cycle_index,
            snapshot: live.session.state.clone(),
            config: live.session.config.clone(),
            records: live.session.records.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub state: Phase,
    pub snapshot: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub state: Phase,
    pub cycle_index: u32,
    pub snapshot: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<AssessmentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipStored {
    pub clip_id: String,
    pub cycle_index: u32,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub clip_id: String,
    pub model_id: String,
    /// Class names, in the order of `probabilities`.
    pub classes: Vec<String>,
    pub probabilities: Vec<f64>,
    pub predicted: String,
}

#[derive(Deserialize)]
struct CreateRequest {
    #[serde(flatten)]
    config: SessionConfig,
    #[serde(default)]
    at_ms: Option<i64>,
}

#[derive(Deserialize)]
struct EventRequest {
    #[serde(default)]
    at_ms: Option<i64>,
    #[serde(flatten)]
    event: SessionEvent,
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("bad_json", e.to_string()))
}

async fn health() -> &'static str {
    "ok"
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateRequest = parse_json(&body)?;
    let started_at_ms = req.at_ms.unwrap_or_else(now_ms);
    let session = Session::start(req.config.clone(), started_at_ms)?;
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let meta = SessionMeta {
        session_id: session_id.clone(),
        started_at_ms,
        config: req.config,
    };
    app.store.create_session(&meta).map_err(ApiError::internal)?;
    let created = Created {
        session_id: session_id.clone(),
        state: session.state.phase,
        snapshot: session.state.clone(),
    };
    let live = LiveSession {
        meta,
        session,
        clips: BTreeMap::new(),
    };
    app.sessions.write().await.insert(session_id, Arc::new(Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = app.sessions.read().await.keys().cloned().collect();
    ids.sort();
    Json(ids)
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let entry = app.session(&id).await?;
    let live = entry.lock().await;
    Ok(Json(SessionView::of(&live)))
}

async fn post_event(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EventOutcome>, ApiError> {
    let entry = app.session(&id).await?;
    let req: EventRequest = parse_json(&body)?;
    let mut live = entry.lock().await;
    if live.session.state.phase.is_terminal() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_terminal",
            format!("session is {}; no further events are accepted", live.session.state.phase),
        ));
    }
    let at_ms = req.at_ms.unwrap_or_else(|| now_ms().max(live.session.state.clock_ms));
    let event = match req.event {
        SessionEvent::RecordingDone { clip_id, .. } => {
            if live.session.state.phase != Phase::Reading {
                // let the engine name the illegal pair
                SessionEvent::RecordingDone { clip_id, wav_path: None }
            } else {
                let path = live.clips.get(&clip_id).ok_or_else(|| {
                    ApiError::new(
                        StatusCode::UNPROCESSABLE_ENTITY,
                        "unknown_clip",
                        format!("clip {clip_id:?} has not been uploaded to this session"),
                    )
                })?;
                SessionEvent::RecordingDone {
                    wav_path: Some(path.display().to_string()),
                    clip_id,
                }
            }
        }
        other => other,
    };
    // apply to a copy; commit only once the log line is durable
    let mut next = live.session.clone();
    let step = next.advance(&event, at_ms)?;
    app.store
        .append_event(&id, &TimedEvent::new(at_ms, event))
        .map_err(ApiError::internal)?;
    live.session = next;
    Ok(Json(EventOutcome {
        state: step.state.phase,
        cycle_index: step.state.cycle_index,
        snapshot: step.state,
        record: step.record,
        feedback: step.feedback,
    }))
}

async fn post_clip(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<ClipStored>, ApiError> {
    let entry = app.session(&id).await?;
    let cycle_index: u32 = headers
        .get("x-cycle-index")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| ApiError::bad_request("bad_header", "X-Cycle-Index header with a cycle number is required"))?;
    let clip = decode_wav(&body).map_err(|e| ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_audio", e.to_string()))?;
    let duration_s = clip.duration_seconds();
    let mut live = entry.lock().await;
    let record_s = f64::from(live.session.config.record_s);
    if (duration_s - record_s).abs() > CLIP_TOLERANCE_S {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "bad_duration",
            format!("clip is {duration_s:.2} s; expected {record_s} +/- {CLIP_TOLERANCE_S} s"),
        ));
    }
    if cycle_index >= live.session.config.repetitions {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "bad_cycle",
            format!("cycle {cycle_index} is beyond the session's {} repetitions", live.session.config.repetitions),
        ));
    }
    let clip_id = content_id(&body);
    let path = app.store.put_clip(&id, &clip_id, &body).map_err(ApiError::internal)?;
    live.clips.insert(clip_id.clone(), path);
    Ok(Json(ClipStored {
        clip_id,
        cycle_index,
        duration_s,
    }))
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn export_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let entry = app.session(&id).await?;
    let live = entry.lock().await;
    let records = &live.session.records;
    match q.format.as_deref().unwrap_or("json") {
        "csv" => Ok((
            [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
            records_csv(&live.session.config.participant_id, records),
        )
            .into_response()),
        "json" => Ok(([(header::CONTENT_TYPE, "application/json")], records_json(records)).into_response()),
        other => Err(ApiError::bad_request(
            "unsupported_format",
            format!("format {other:?} is not supported; use csv or json"),
        )),
    }
}

async fn list_models(State(app): State<AppState>) -> Result<Json<Vec<String>>, ApiError> {
    app.store.model_ids().map(Json).map_err(ApiError::internal)
}

#[derive(Deserialize)]
struct InferQuery {
    model_id: String,
    #[serde(default)]
    task: Option<String>,
}

async fn infer(
    State(app): State<AppState>,
    Query(q): Query<InferQuery>,
    body: Bytes,
) -> Result<Json<InferenceResult>, ApiError> {
    if !is_safe_id(&q.model_id) {
        return Err(ApiError::not_found("model", &q.model_id));
    }
    let wanted: Option<Task> = q
        .task
        .as_deref()
        .map(str::parse)
        .transpose()
        .map_err(|e: String| ApiError::bad_request("bad_task", e))?;
    let path = app.store.model_path(&q.model_id);
    let model_id = q.model_id.clone();
    tokio::task::spawn_blocking(move || {
        let bytes = std::fs::read(&path).map_err(|_| ApiError::not_found("model", &model_id))?;
        let model = decode_model(&bytes).map_err(ApiError::internal)?;
        if let Some(task) = wanted {
            if task != model.task() {
                return Err(ApiError::bad_request(
                    "task_mismatch",
                    format!("model {model_id} was trained for the {} task", model.task()),
                ));
            }
        }
        let clip = decode_wav(&body)
            .map_err(|e| ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_audio", e.to_string()))?;
        let features = extract_features(&clip, &model.features)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unusable_audio", e.to_string()))?;
        let probabilities = forward(&model, &features.values).map_err(ApiError::internal)?;
        let classes: Vec<String> = model.task().class_names().iter().map(|s| s.to_string()).collect();
        let predicted = classes[argmax_severe(&probabilities)].clone();
        Ok(InferenceResult {
            clip_id: content_id(&body),
            model_id,
            classes,
            probabilities,
            predicted,
        })
    })
    .await
    .map_err(ApiError::internal)?
    .map(Json)
}
