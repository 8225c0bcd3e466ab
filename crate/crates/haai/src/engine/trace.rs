//! Turn reports and the JSON Lines trace log.
//!
//! Trace ordering is the recomputed-log order and must be bit-exact across
//! runs: nothing here may iterate a hash map.

use std::io::Write;
use std::time::Duration;

use serde::Serialize;

use crate::value::SignalId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Emit,
    Commit,
    Switch,
    Error,
}

/// One line of the JSONL trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub turn: u64,
    pub kind: TraceKind,
    #[serde(rename = "signal_or_deployment_id")]
    pub id: u32,
    pub name_path: String,
    pub value: serde_json::Value,
}

/// Per-turn record returned by the engine.
#[derive(Debug, Clone)]
pub struct TurnReport {
    pub turn: u64,
    pub seeded: Vec<SignalId>,
    pub recomputed: Vec<SignalId>,
    pub switches: usize,
    pub commits: usize,
    pub deployments_created: usize,
    pub errors: Vec<String>,
    pub elapsed: Duration,
    /// Index range of this turn's events in the engine's trace log.
    pub trace_range: (usize, usize),
}

#[derive(Default)]
pub struct TraceLog {
    events: Vec<TraceEvent>,
    writer: Option<Box<dyn Write + Send>>,
}

impl std::fmt::Debug for TraceLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceLog")
            .field("events", &self.events.len())
            .finish()
    }
}

impl TraceLog {
    pub fn push(&mut self, event: TraceEvent) {
        if let Some(w) = &mut self.writer {
            let line = serde_json::to_string(&event).expect("trace event serializes");
            let _ = writeln!(w, "{line}");
        }
        self.events.push(event);
    }

    pub fn set_writer(&mut self, writer: Box<dyn Write + Send>) {
        self.writer = Some(writer);
    }

    pub fn flush(&mut self) {
        if let Some(w) = &mut self.writer {
            let _ = w.flush();
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Render a slice of events as JSONL text.
pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("trace event serializes"));
        out.push('\n');
    }
    out
}
