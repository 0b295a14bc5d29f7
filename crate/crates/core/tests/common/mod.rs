//! Shared fixtures: toy checkpoints, an in-process server, and the golden
//! request/response runner.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use mthd_core::adaptation::Checkpoint;
use mthd_core::seq2seq::{init_model, ModelConfig};
use mthd_core::server::{router, AppState, ServerConfig};
use mthd_core::task::TaskKind;
use mthd_core::textdata::Vocabulary;
use serde_json::Value;
use tower::ServiceExt;

pub const OLD: [&str; 4] = ["vna casa vieja", "dixo el rey", "mui bueno", "la cibdad es grande"];
pub const MODERN: [&str; 4] = ["una casa vieja", "dijo el rey", "muy bueno", "la ciudad es grande"];
pub const DEMO_SENTENCES: &str = "vna casa vieja\ndixo el rey\n\nmui bueno\n";

pub fn toy_checkpoint(task: TaskKind, seed: u64) -> Checkpoint {
    let mode = task.mode();
    let sv = Vocabulary::build(OLD, mode, 1);
    let tv = Vocabulary::build(MODERN, mode, 1);
    let mut c = ModelConfig::new(sv.len(), tv.len(), mode);
    c.embed_dim = 8;
    c.hidden_dim = 12;
    c.seed = seed;
    Checkpoint::new(init_model(&c).unwrap(), sv, tv).unwrap()
}

pub struct FixtureOptions {
    pub tasks: Vec<TaskKind>,
    pub learning_rate: f64,
    pub session_ttl_secs: u64,
    pub cors_origins: Vec<String>,
    /// Served for normalize instead of the toy model.
    pub normalize_checkpoint: Option<Checkpoint>,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            tasks: TaskKind::ALL.to_vec(),
            learning_rate: 0.01,
            session_ttl_secs: 1800,
            cors_origins: Vec::new(),
            normalize_checkpoint: None,
        }
    }
}

/// A server built from a config file in a temporary directory. Normalize
/// has a sentence list; modernize does not.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: ServerConfig,
    pub state: Arc<AppState>,
    pub app: Router,
}

impl Fixture {
    pub fn new(opts: FixtureOptions) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let mut toml = format!(
            "session_ttl_secs = {}\nlog_path = \"validated.jsonl\"\ncors_origins = {:?}\n\n[adaptation]\nsteps = 3\nlearning_rate = {:e}\n",
            opts.session_ttl_secs, opts.cors_origins, opts.learning_rate
        );
        for &task in &opts.tasks {
            let ck = match (&opts.normalize_checkpoint, task) {
                (Some(ck), TaskKind::Normalize) => ck.clone(),
                _ => toy_checkpoint(task, 11),
            };
            ck.save(&dir.path().join(format!("{task}.ckpt"))).unwrap();
            toml.push_str(&format!("\n[tasks.{task}]\ncheckpoint = \"{task}.ckpt\"\n"));
            if task == TaskKind::Normalize {
                std::fs::write(dir.path().join("sentences.txt"), DEMO_SENTENCES).unwrap();
                toml.push_str("sentences = \"sentences.txt\"\n");
            }
        }
        let path = dir.path().join("mthd.toml");
        std::fs::write(&path, toml).unwrap();
        let config = ServerConfig::load(&path).unwrap();
        let state = Arc::new(AppState::from_config(&config).unwrap());
        let app = router(state.clone(), &config.cors_origins).unwrap();
        Fixture { dir, config, state, app }
    }

    pub fn checkpoint_path(&self, task: TaskKind) -> PathBuf {
        self.dir.path().join(format!("{task}.ckpt"))
    }

    pub fn log_path(&self) -> &Path {
        &self.config.log_path
    }

    pub async fn call(&self, method: &str, path: &str, body: Option<&Value>) -> (StatusCode, Vec<u8>) {
        call(&self.app, method, path, body).await
    }

    pub async fn json(&self, method: &str, path: &str, body: Option<&Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.call(method, path, body).await;
        (status, serde_json::from_slice(&bytes).unwrap())
    }
}

pub async fn call(app: &Router, method: &str, path: &str, body: Option<&Value>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(path);
    let req = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(v).unwrap()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub const SESSION_PLACEHOLDER: &str = "<session_id>";

fn is_uuid_v4(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    let lens = [8, 4, 4, 4, 12];
    parts.len() == 5
        && parts.iter().zip(lens).all(|(p, n)| p.len() == n && p.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()))
        && parts[2].starts_with('4')
}

fn substitute(v: &mut Value, session: Option<&str>) {
    match v {
        Value::String(s) if s == SESSION_PLACEHOLDER => {
            if let Some(id) = session {
                *s = id.to_string();
            }
        }
        Value::Array(a) => a.iter_mut().for_each(|x| substitute(x, session)),
        Value::Object(o) => o.values_mut().for_each(|x| substitute(x, session)),
        _ => {}
    }
}

#[derive(Debug)]
pub struct GoldenOutcome {
    pub case: String,
    pub failure: Option<String>,
}

/// Replays every `*.request.json` under `tests/golden` in name order.
/// Each request names its server ("default", or "diverging" with a huge
/// adaptation rate), method, path, optional body and expected status. A
/// `session_id` in a response must be a v4 UUID and is replaced by the
/// placeholder before the byte comparison; the placeholder in a request
/// body stands for the last session issued by the same server.
///
/// With `update`, response files are rewritten instead of compared.
pub async fn run_golden(update: bool) -> Vec<GoldenOutcome> {
    let default = Fixture::new(FixtureOptions::default());
    let diverging = Fixture::new(FixtureOptions {
        learning_rate: 1e300,
        ..Default::default()
    });
    let mut last_session: [Option<String>; 2] = [None, None];

    let mut names: Vec<PathBuf> = std::fs::read_dir(golden_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".request.json"))
        .collect();
    names.sort();

    let mut outcomes = Vec::new();
    for req_path in names {
        let case = req_path
            .file_name()
            .unwrap()
            .to_string_lossy()
            .trim_end_matches(".request.json")
            .to_string();
        let spec: Value = serde_json::from_slice(&std::fs::read(&req_path).unwrap()).unwrap();
        let which = usize::from(spec["server"] == "diverging");
        let fixture = if which == 1 { &diverging } else { &default };
        let mut body = spec.get("body").cloned().filter(|b| !b.is_null());
        if let Some(b) = body.as_mut() {
            substitute(b, last_session[which].as_deref());
        }
        let (status, bytes) = fixture
            .call(spec["method"].as_str().unwrap(), spec["path"].as_str().unwrap(), body.as_ref())
            .await;

        let mut failure = None;
        let parsed: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        let mut normalized = bytes.clone();
        if let Some(id) = parsed.get("session_id").and_then(Value::as_str).map(str::to_string) {
            if !is_uuid_v4(&id) {
                failure = Some(format!("session_id {id:?} is not a v4 UUID"));
            }
            last_session[which] = Some(id.clone());
            let text = String::from_utf8(bytes.clone()).unwrap();
            normalized = text.replacen(&id, SESSION_PLACEHOLDER, 1).into_bytes();
        }
        if status.as_u16() as u64 != spec["status"].as_u64().unwrap() {
            failure.get_or_insert(format!("status {} != expected {}", status, spec["status"]));
        }

        let resp_path = golden_dir().join(format!("{case}.response.json"));
        if update {
            std::fs::write(&resp_path, &normalized).unwrap();
        } else {
            match std::fs::read(&resp_path) {
                Ok(expected) if expected == normalized => {}
                Ok(expected) => {
                    failure.get_or_insert(format!(
                        "body mismatch:\n  got      {}\n  expected {}",
                        String::from_utf8_lossy(&normalized),
                        String::from_utf8_lossy(&expected)
                    ));
                }
                Err(e) => {
                    failure.get_or_insert(format!("{}: {e}", resp_path.display()));
                }
            }
        }
        outcomes.push(GoldenOutcome { case, failure });
    }
    outcomes
}

/// Error codes that the golden cases must exercise.
pub const REQUIRED_ERROR_CODES: [&str; 5] = [
    "empty_source",
    "session_not_found",
    "empty_prefix",
    "task_unavailable",
    "adaptation_diverged",
];

pub fn golden_error_codes() -> Vec<String> {
    let mut codes = Vec::new();
    for e in std::fs::read_dir(golden_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.to_string_lossy().ends_with(".response.json") {
            let v: Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
            if let Some(c) = v.pointer("/error/code").and_then(Value::as_str) {
                codes.push(c.to_string());
            }
        }
    }
    codes.sort();
    codes.dedup();
    codes
}
