//! Append-only JSON-lines log of validated samples.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::adapt::{adapt, AdaptationConfig};
use super::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::task::TaskKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatedSample {
    pub task: TaskKind,
    pub source: String,
    pub target: String,
    #[serde(with = "iso8601")]
    pub timestamp: DateTime<Utc>,
    /// Whether the sample was applied to the served model. Replay only
    /// re-applies learned samples.
    #[serde(default)]
    pub learned: bool,
}

impl ValidatedSample {
    pub fn new(task: TaskKind, source: impl Into<String>, target: impl Into<String>) -> Result<Self> {
        let (source, target) = (source.into(), target.into());
        if source.trim().is_empty() || target.trim().is_empty() {
            return Err(Error::Sample("source and target must be non-empty".into()));
        }
        Ok(ValidatedSample {
            task,
            source,
            target,
            timestamp: Utc::now(),
            learned: false,
        })
    }
}

mod iso8601 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// Appends one JSON record and a newline.
pub fn append_validated(sample: &ValidatedSample, log_path: &Path) -> Result<()> {
    let mut line = serde_json::to_string(sample).expect("sample serializes");
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log_path)
        .map_err(|e| Error::io(log_path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(log_path, e))
}

/// Reads every record; a missing log reads as empty.
pub fn read_log(log_path: &Path) -> Result<Vec<ValidatedSample>> {
    let text = match fs::read_to_string(log_path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(log_path, e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format(format!("{} line {}: {e}", log_path.display(), i + 1)))
        })
        .collect()
}

/// Re-applies, in order, every learned sample of `task` to `checkpoint`.
/// Returns the number of samples applied.
pub fn replay(
    samples: &[ValidatedSample],
    task: TaskKind,
    checkpoint: &mut Checkpoint,
    config: &AdaptationConfig,
) -> Result<usize> {
    let mut applied = 0;
    for s in samples.iter().filter(|s| s.task == task && s.learned) {
        adapt(
            &mut checkpoint.model,
            &checkpoint.src_vocab,
            &checkpoint.tgt_vocab,
            &s.source,
            &s.target,
            config,
        )?;
        applied += 1;
    }
    Ok(applied)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("mthd-log-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        let p = d.join(name);
        let _ = fs::remove_file(&p);
        p
    }

    #[test]
    fn appends_in_order() {
        let path = tmp("order.jsonl");
        let samples: Vec<ValidatedSample> = (0..5)
            .map(|i| ValidatedSample::new(TaskKind::Normalize, format!("vno {i}"), format!("uno {i}")).unwrap())
            .collect();
        for s in &samples {
            append_validated(s, &path).unwrap();
        }
        let back = read_log(&path).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in back.iter().zip(&samples) {
            assert_eq!(a.source, b.source);
            assert_eq!(a.task, b.task);
            assert_eq!(a.timestamp.timestamp_millis(), b.timestamp.timestamp_millis());
        }
    }

    #[test]
    fn record_shape() {
        let mut s = ValidatedSample::new(TaskKind::Modernize, "agora", "ahora").unwrap();
        s.timestamp = DateTime::parse_from_rfc3339("2020-05-01T10:00:00Z").unwrap().with_timezone(&Utc);
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"task":"modernize","source":"agora","target":"ahora","timestamp":"2020-05-01T10:00:00.000Z","learned":false}"#
        );
    }

    #[test]
    fn missing_log_is_empty() {
        assert!(read_log(&tmp("absent.jsonl")).unwrap().is_empty());
    }

    #[test]
    fn corrupt_line_reports_position() {
        let path = tmp("bad.jsonl");
        fs::write(&path, "{\"task\":\"normalize\"}\n").unwrap();
        assert!(matches!(read_log(&path), Err(Error::Format(m)) if m.contains("line 1")));
    }
}
