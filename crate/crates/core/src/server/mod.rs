//! JSON/HTTP service: per-task models, correction sessions and online
//! learning from validated sentences.
//!
//! Decoding requests share a task's model through a fair read/write lock;
//! learning takes the write side, so it waits for in-flight decodes and
//! requests queued behind it wait for the update.

mod config;
mod error;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::RwLock;
use tower_http::cors::CorsLayer;

use crate::adaptation::{append_validated, load_checkpoint, read_log, replay, AdaptationConfig, ValidatedSample};
use crate::error::{Error, Result};
use crate::task::{TaskKind, TaskModel};
use crate::textdata::read_lines;

pub use config::{resolve_config_path, ServerConfig, TaskConfig, CONFIG_ENV, DEFAULT_CONFIG_PATH};
pub use error::ApiError;

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

/// One task's served model and demo sentences.
pub struct TaskSlot {
    model: Arc<RwLock<TaskModel>>,
    sentences: Option<Vec<String>>,
}

impl TaskSlot {
    pub fn new(model: TaskModel, sentences: Option<Vec<String>>) -> Self {
        TaskSlot {
            model: Arc::new(RwLock::new(model)),
            sentences,
        }
    }

    pub fn model(&self) -> &Arc<RwLock<TaskModel>> {
        &self.model
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub task: TaskKind,
    pub source: String,
    pub current_hypothesis: String,
    pub created: DateTime<Utc>,
}

struct SessionEntry {
    session: Arc<tokio::sync::Mutex<Session>>,
    last_touched: Instant,
}

pub struct AppState {
    tasks: BTreeMap<TaskKind, TaskSlot>,
    sessions: Mutex<HashMap<String, SessionEntry>>,
    log_path: PathBuf,
    log_lock: Mutex<()>,
    adaptation: AdaptationConfig,
    session_ttl: Duration,
}

impl AppState {
    pub fn new(
        tasks: BTreeMap<TaskKind, TaskSlot>,
        log_path: PathBuf,
        adaptation: AdaptationConfig,
        session_ttl: Duration,
    ) -> Self {
        AppState {
            tasks,
            sessions: Mutex::new(HashMap::new()),
            log_path,
            log_lock: Mutex::new(()),
            adaptation,
            session_ttl,
        }
    }

    /// Loads every configured task. A task whose checkpoint or sentence
    /// file cannot be loaded is left out (the server reports "degraded");
    /// loading no task at all is an error.
    pub fn from_config(config: &ServerConfig) -> Result<Self> {
        let mut tasks = BTreeMap::new();
        for (&task, tc) in &config.tasks {
            match load_task(task, tc, config) {
                Ok(slot) => {
                    tasks.insert(task, slot);
                }
                Err(e) => eprintln!("task {task} unavailable: {e}"),
            }
        }
        if tasks.is_empty() {
            return Err(Error::Config("no task could be loaded".into()));
        }
        Ok(Self::new(
            tasks,
            config.log_path.clone(),
            config.adaptation,
            config.session_ttl(),
        ))
    }

    pub fn task(&self, task: TaskKind) -> Option<&TaskSlot> {
        self.tasks.get(&task)
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn slot(&self, task: TaskKind) -> std::result::Result<&TaskSlot, ApiError> {
        self.tasks
            .get(&task)
            .ok_or_else(|| ApiError::task_unavailable(format!("task {task} is not loaded")))
    }

    fn purge_expired(&self, sessions: &mut HashMap<String, SessionEntry>) {
        let ttl = self.session_ttl;
        sessions.retain(|_, e| e.last_touched.elapsed() < ttl);
    }

    fn touch(&self, id: &str) -> std::result::Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        let mut sessions = self.sessions.lock().unwrap();
        self.purge_expired(&mut sessions);
        let entry = sessions.get_mut(id).ok_or_else(ApiError::session_not_found)?;
        entry.last_touched = Instant::now();
        Ok(entry.session.clone())
    }

    fn close(&self, id: &str) -> std::result::Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        let mut sessions = self.sessions.lock().unwrap();
        self.purge_expired(&mut sessions);
        sessions
            .remove(id)
            .map(|e| e.session)
            .ok_or_else(ApiError::session_not_found)
    }

    fn log(&self, sample: &ValidatedSample) -> Result<()> {
        let _guard = self.log_lock.lock().unwrap();
        append_validated(sample, &self.log_path)
    }
}

fn load_task(task: TaskKind, tc: &TaskConfig, config: &ServerConfig) -> Result<TaskSlot> {
    let mut checkpoint = load_checkpoint(&tc.checkpoint)?;
    if config.replay_log_on_start {
        let samples = read_log(&config.log_path)?;
        replay(&samples, task, &mut checkpoint, &config.adaptation)?;
    }
    let model = TaskModel::for_task(checkpoint, task)?;
    let sentences = match &tc.sentences {
        Some(p) => Some(read_lines(p)?.into_iter().filter(|l| !l.trim().is_empty()).collect()),
        None => None,
    };
    Ok(TaskSlot::new(model, sentences))
}

fn body<T>(payload: std::result::Result<Json<T>, JsonRejection>) -> std::result::Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request("bad_request", e.body_text()))
}

fn parse_task(name: &str) -> std::result::Result<TaskKind, ApiError> {
    name.parse()
        .map_err(|_| ApiError::task_unavailable(format!("unknown task {name:?}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T> + Send + 'static,
) -> std::result::Result<Result<T>, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

#[derive(Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub tasks: Vec<TaskKind>,
    pub checksums: BTreeMap<TaskKind, String>,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<HealthResponse> {
    let mut checksums = BTreeMap::new();
    for (&task, slot) in &state.tasks {
        let sum = slot.model.read().await.checksum();
        checksums.insert(task, format!("{sum:016x}"));
    }
    let all = TaskKind::ALL.iter().all(|t| state.tasks.contains_key(t));
    Json(HealthResponse {
        status: if all { "ok" } else { "degraded" },
        tasks: state.tasks.keys().copied().collect(),
        checksums,
    })
}

#[derive(Deserialize)]
struct SentencesQuery {
    task: String,
}

#[derive(Serialize)]
pub struct SentencesResponse {
    pub sentences: Vec<String>,
}

async fn sentences(
    State(state): State<Arc<AppState>>,
    query: std::result::Result<Query<SentencesQuery>, QueryRejection>,
) -> ApiResult<SentencesResponse> {
    let Query(q) = query.map_err(|e| ApiError::bad_request("bad_request", e.body_text()))?;
    let task = parse_task(&q.task)?;
    let sentences = state
        .slot(task)?
        .sentences
        .clone()
        .ok_or_else(|| ApiError::task_unavailable(format!("no sentences configured for {task}")))?;
    Ok(Json(SentencesResponse { sentences }))
}

#[derive(Deserialize)]
struct TranslateRequest {
    task: String,
    source: String,
}

#[derive(Serialize)]
pub struct TranslateResponse {
    pub session_id: String,
    pub hypothesis: String,
}

async fn translate(
    State(state): State<Arc<AppState>>,
    payload: std::result::Result<Json<TranslateRequest>, JsonRejection>,
) -> ApiResult<TranslateResponse> {
    let req = body(payload)?;
    let task = parse_task(&req.task)?;
    let slot = state.slot(task)?;
    if req.source.trim().is_empty() {
        return Err(ApiError::bad_request("empty_source", "source is empty"));
    }
    let model = slot.model.clone().read_owned().await;
    let source = req.source.clone();
    let hypothesis = blocking(move || model.translate(&source)).await??;

    let session_id = uuid::Uuid::new_v4().to_string();
    let session = Session {
        session_id: session_id.clone(),
        task,
        source: req.source,
        current_hypothesis: hypothesis.clone(),
        created: Utc::now(),
    };
    let mut sessions = state.sessions.lock().unwrap();
    state.purge_expired(&mut sessions);
    sessions.insert(
        session_id.clone(),
        SessionEntry {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            last_touched: Instant::now(),
        },
    );
    Ok(Json(TranslateResponse { session_id, hypothesis }))
}

#[derive(Deserialize)]
struct CorrectRequest {
    session_id: String,
    prefix: String,
    #[serde(default)]
    source: Option<String>,
}

#[derive(Serialize)]
pub struct CorrectResponse {
    pub hypothesis: String,
}

async fn correct(
    State(state): State<Arc<AppState>>,
    payload: std::result::Result<Json<CorrectRequest>, JsonRejection>,
) -> ApiResult<CorrectResponse> {
    let req = body(payload)?;
    let handle = state.touch(&req.session_id)?;
    let mut session = handle.lock_owned().await;
    if req.prefix.is_empty() {
        return Err(ApiError::bad_request("empty_prefix", "prefix is empty"));
    }
    if let Some(src) = &req.source {
        if *src != session.source {
            return Err(ApiError::bad_request("source_mismatch", "source differs from the session's source"));
        }
    }
    let model = state.slot(session.task)?.model.clone().read_owned().await;
    let (source, prefix) = (session.source.clone(), req.prefix.clone());
    let hypothesis = blocking(move || model.correct(&source, &prefix)).await??;
    session.current_hypothesis = hypothesis.clone();
    Ok(Json(CorrectResponse { hypothesis }))
}

#[derive(Deserialize)]
struct ValidateRequest {
    session_id: String,
    target: String,
    #[serde(default)]
    learn: bool,
}

#[derive(Serialize)]
pub struct ValidateResponse {
    pub learned: bool,
    pub steps: usize,
    pub final_loss: Option<f64>,
}

async fn validate(
    State(state): State<Arc<AppState>>,
    payload: std::result::Result<Json<ValidateRequest>, JsonRejection>,
) -> ApiResult<ValidateResponse> {
    let req = body(payload)?;
    state.touch(&req.session_id)?;
    if req.target.trim().is_empty() {
        return Err(ApiError::bad_request("empty_target", "target is empty"));
    }
    let handle = state.close(&req.session_id)?;
    let session = handle.lock_owned().await;
    let mut sample = ValidatedSample::new(session.task, session.source.clone(), req.target.clone())?;

    if !req.learn {
        state.log(&sample)?;
        return Ok(Json(ValidateResponse {
            learned: false,
            steps: 0,
            final_loss: None,
        }));
    }

    // The sample is logged while the write lock is held so that the log
    // order is the order in which updates were applied.
    let mut model = state.slot(session.task)?.model.clone().write_owned().await;
    let config = state.adaptation;
    let st = state.clone();
    let outcome = blocking(move || {
        let result = model.learn(&sample.source, &sample.target, &config);
        sample.learned = result.is_ok();
        st.log(&sample)?;
        Ok(result)
    })
    .await??;

    match outcome {
        Ok(report) => Ok(Json(ValidateResponse {
            learned: true,
            steps: report.steps(),
            final_loss: Some(report.final_loss()),
        })),
        Err(e @ Error::Diverged { .. }) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "adaptation_diverged",
            e.to_string(),
        )
        .with("learned", Value::Bool(false))
        .with("steps", Value::from(0))
        .with("final_loss", Value::Null)),
        Err(e) => Err(e.into()),
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: Arc<AppState>, cors_origins: &[String]) -> Result<Router> {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/sentences", get(sentences))
        .route("/api/translate", post(translate))
        .route("/api/correct", post(correct))
        .route("/api/validate", post(validate))
        .fallback(not_found)
        .with_state(state);
    if !cors_origins.is_empty() {
        let origins = cors_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|e| Error::Config(format!("cors origin {o:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origins)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

/// Serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> Result<()> {
    let state = Arc::new(AppState::from_config(&config)?);
    let app = router(state, &config.cors_origins)?;
    let addr = format!("{}:{}", config.bind, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    eprintln!("listening on {addr}");
    axum::serve(listener, app)
        .await
        .map_err(|e| Error::Config(format!("server stopped: {e}")))
}

/// Serves on an already bound listener; used by tests and the simulator.
pub async fn serve_on(listener: tokio::net::TcpListener, app: Router) -> Result<()> {
    axum::serve(listener, app)
        .await
        .map_err(|e| Error::Config(format!("server stopped: {e}")))
}
