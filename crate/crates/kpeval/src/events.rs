//! Structured run events: one JSON object per line, so warning counts are
//! testable. Stderr echo is filtered by the `KPEVAL_LOG` level.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::ingest::Warning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Error,
    Warn,
    Info,
    Debug,
}

impl Level {
    pub fn from_env() -> Level {
        match std::env::var("KPEVAL_LOG").as_deref() {
            Ok("error") => Level::Error,
            Ok("info") => Level::Info,
            Ok("debug") => Level::Debug,
            _ => Level::Warn,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub level: Level,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub context: std::collections::BTreeMap<String, String>,
}

/// Collects events during a run; flushed to a log file at the end.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn push(&mut self, level: Level, code: &str, message: impl Into<String>) {
        self.events.push(Event {
            level,
            code: code.to_string(),
            message: message.into(),
            context: Default::default(),
        });
    }

    pub fn extend_warnings(&mut self, warnings: Vec<Warning>) {
        for w in warnings {
            self.events.push(Event {
                level: Level::Warn,
                code: w.code,
                message: w.message,
                context: w.context,
            });
        }
    }

    pub fn warning_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.level <= Level::Warn)
            .count()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Write all events as JSON lines.
    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let mut out = Vec::new();
        for e in &self.events {
            serde_json::to_writer(&mut out, e).expect("serializable event");
            out.push(b'\n');
        }
        std::fs::write(path, out)
    }

    /// Echo events at or above `level` to stderr.
    pub fn echo(&self, level: Level) {
        let mut err = std::io::stderr().lock();
        for e in &self.events {
            if e.level <= level {
                let _ = writeln!(err, "[{:?}] {}: {}", e.level, e.code, e.message);
            }
        }
    }
}
