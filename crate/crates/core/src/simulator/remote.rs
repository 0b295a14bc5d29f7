use serde_json::{json, Value};

use super::engine::InteractiveEngine;
use crate::error::{Error, Result};
use crate::task::TaskKind;

/// Drives a running server over its JSON protocol. One session is open at
/// a time; `validate` closes it.
pub struct RemoteEngine {
    agent: ureq::Agent,
    base_url: String,
    task: TaskKind,
    session: Option<(String, String)>,
}

impl RemoteEngine {
    pub fn new(base_url: &str, task: TaskKind) -> Self {
        RemoteEngine {
            agent: ureq::Agent::new(),
            base_url: base_url.trim_end_matches('/').to_string(),
            task,
            session: None,
        }
    }

    fn post(&self, path: &str, body: Value) -> Result<Value> {
        let url = format!("{}{}", self.base_url, path);
        match self.agent.post(&url).send_json(body) {
            Ok(resp) => resp.into_json().map_err(|e| Error::Remote(format!("{url}: {e}"))),
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                Err(Error::Remote(format!("{url}: HTTP {status}: {body}")))
            }
            Err(e) => Err(Error::Remote(format!("{url}: {e}"))),
        }
    }

    fn session_for(&self, source: &str) -> Result<&str> {
        match &self.session {
            Some((id, s)) if s == source => Ok(id),
            _ => Err(Error::Remote(format!("no open session for {source:?}"))),
        }
    }
}

fn string_field(v: &Value, key: &str) -> Result<String> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Remote(format!("response lacks string field {key:?}: {v}")))
}

impl InteractiveEngine for RemoteEngine {
    fn translate(&mut self, source: &str) -> Result<String> {
        let v = self.post("/api/translate", json!({"task": self.task, "source": source}))?;
        let id = string_field(&v, "session_id")?;
        self.session = Some((id, source.to_string()));
        string_field(&v, "hypothesis")
    }

    fn correct(&mut self, source: &str, prefix: &str) -> Result<String> {
        let id = self.session_for(source)?.to_string();
        let v = self.post("/api/correct", json!({"session_id": id, "prefix": prefix, "source": source}))?;
        string_field(&v, "hypothesis")
    }

    fn validate(&mut self, source: &str, target: &str, learn: bool) -> Result<()> {
        let id = self.session_for(source)?.to_string();
        self.session = None;
        let v = self.post("/api/validate", json!({"session_id": id, "target": target, "learn": learn}))?;
        if learn && v.get("learned") != Some(&Value::Bool(true)) {
            return Err(Error::Remote(format!("sample not learned: {v}")));
        }
        Ok(())
    }
}
