use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::adaptation::AdaptationConfig;
use crate::error::{Error, Result};
use crate::task::TaskKind;

pub const CONFIG_ENV: &str = "MTHD_CONFIG";
pub const DEFAULT_CONFIG_PATH: &str = "mthd.toml";

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub checkpoint: PathBuf,
    #[serde(default)]
    pub sentences: Option<PathBuf>,
}

/// Server settings, read from TOML. Relative paths are resolved against
/// the directory of the config file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub session_ttl_secs: u64,
    pub log_path: PathBuf,
    /// Re-apply the learned samples already in the log when starting.
    pub replay_log_on_start: bool,
    pub cors_origins: Vec<String>,
    pub adaptation: AdaptationConfig,
    pub tasks: BTreeMap<TaskKind, TaskConfig>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            session_ttl_secs: 30 * 60,
            log_path: "validated.jsonl".into(),
            replay_log_on_start: false,
            cors_origins: Vec::new(),
            adaptation: AdaptationConfig::default(),
            tasks: BTreeMap::new(),
        }
    }
}

impl ServerConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: ServerConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.log_path = base_dir.join(&c.log_path);
        for t in c.tasks.values_mut() {
            t.checkpoint = base_dir.join(&t.checkpoint);
            t.sentences = t.sentences.as_ref().map(|p| base_dir.join(p));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.adaptation.learning_rate > 0.0 && self.adaptation.learning_rate.is_finite()) {
            return Err(Error::Config("adaptation.learning_rate must be positive".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("no tasks configured".into()));
        }
        Ok(())
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }
}

/// An explicit path wins, then `MTHD_CONFIG`, then `mthd.toml`.
pub fn resolve_config_path(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(CONFIG_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from(DEFAULT_CONFIG_PATH),
    }
}
