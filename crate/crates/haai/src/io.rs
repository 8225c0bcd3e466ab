//! The io boundary: everything impure lives here.
//!
//! External events are funneled through an [`EventQueue`]; the engine only
//! ever sees finished batches, seeded at the start of a turn. Source adapters
//! (websocket, timer, stdin) run on their own threads and push into the
//! queue; sink handlers observe sink signals after each turn.

use std::collections::VecDeque;
use std::io::BufRead;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use crate::engine::{Engine, PendingSource, PendingSourceKind, TurnReport};
use crate::value::{SignalId, Value};

/// Milliseconds within which live events coalesce into one batch.
pub const DEFAULT_POLL_MS: u64 = 10;

pub fn poll_window() -> Duration {
    let ms = std::env::var("HAAI_POLL_MS")
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .unwrap_or(DEFAULT_POLL_MS);
    Duration::from_millis(ms)
}

/// An event crossing the thread boundary. The payload is JSON so the queue
/// stays `Send`; the engine thread decodes it when seeding the turn.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEvent {
    pub signal: SignalId,
    pub value: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("event queue closed")]
pub struct QueueClosed;

struct QueueState {
    events: VecDeque<ExternalEvent>,
    closed: bool,
}

/// Thread-safe queue of pending external events.
#[derive(Clone)]
pub struct EventQueue {
    inner: Arc<(Mutex<QueueState>, Condvar)>,
}

impl Default for EventQueue {
    fn default() -> Self {
        EventQueue::new()
    }
}

impl EventQueue {
    pub fn new() -> EventQueue {
        EventQueue {
            inner: Arc::new((
                Mutex::new(QueueState {
                    events: VecDeque::new(),
                    closed: false,
                }),
                Condvar::new(),
            )),
        }
    }

    pub fn push(&self, event: ExternalEvent) {
        let (lock, cvar) = &*self.inner;
        let mut state = lock.lock().unwrap();
        if !state.closed {
            state.events.push_back(event);
            cvar.notify_all();
        }
    }

    pub fn close(&self) {
        let (lock, cvar) = &*self.inner;
        lock.lock().unwrap().closed = true;
        cvar.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.inner.0.lock().unwrap().closed
    }

    /// Block until at least one event arrives, then collect everything that
    /// shows up within `window` into one batch. A second event on a source
    /// already in the batch stays queued and opens the next batch, so a turn
    /// never sees two values for the same signal.
    pub fn pop_batch(&self, window: Duration) -> Result<Vec<ExternalEvent>, QueueClosed> {
        let (lock, cvar) = &*self.inner;
        let mut state = lock.lock().unwrap();
        while state.events.is_empty() {
            if state.closed {
                return Err(QueueClosed);
            }
            state = cvar.wait(state).unwrap();
        }
        if !state.closed {
            let deadline = std::time::Instant::now() + window;
            loop {
                let now = std::time::Instant::now();
                if now >= deadline || state.closed {
                    break;
                }
                let (s, timeout) = cvar.wait_timeout(state, deadline - now).unwrap();
                state = s;
                if timeout.timed_out() {
                    break;
                }
            }
        }
        let mut batch: Vec<ExternalEvent> = Vec::new();
        while let Some(front) = state.events.front() {
            if batch.iter().any(|e| e.signal == front.signal) {
                break;
            }
            batch.push(state.events.pop_front().unwrap());
        }
        Ok(batch)
    }
}

// ----- replay scripts ------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error("line {0}: batch numbers must be non-decreasing")]
    BatchOrder(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a replay script.
#[derive(Debug, serde::Deserialize)]
struct ScriptLine {
    batch: u64,
    source: String,
    value: serde_json::Value,
}

/// Parse a JSONL replay script into batches of (source name, value) pairs.
/// Lines with equal `batch` numbers seed the same turn.
pub fn read_script(text: &str) -> Result<Vec<Vec<(String, Value)>>, ScriptError> {
    let mut batches: Vec<(u64, Vec<(String, Value)>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ScriptLine = serde_json::from_str(line)
            .map_err(|e| ScriptError::Malformed(n, e.to_string()))?;
        let value = Value::from_json(&parsed.value)
            .ok_or_else(|| ScriptError::Malformed(n, "unsupported value".to_string()))?;
        match batches.last_mut() {
            Some((b, items)) if *b == parsed.batch => items.push((parsed.source, value)),
            Some((b, _)) if *b > parsed.batch => return Err(ScriptError::BatchOrder(n)),
            _ => batches.push((parsed.batch, vec![(parsed.source, value)])),
        }
    }
    Ok(batches.into_iter().map(|(_, items)| items).collect())
}

/// Run every batch of a parsed script as one turn each.
pub fn run_script(
    engine: &mut Engine,
    batches: &[Vec<(String, Value)>],
) -> Result<Vec<TurnReport>, crate::engine::EngineError> {
    let mut reports = Vec::with_capacity(batches.len());
    for batch in batches {
        let named: Vec<(&str, Value)> = batch
            .iter()
            .map(|(name, v)| (name.as_str(), v.clone()))
            .collect();
        reports.push(engine.run_turn_named(&named)?);
    }
    Ok(reports)
}

// ----- live source adapters ------------------------------------------------

pub struct AdapterSet {
    stop: Arc<AtomicBool>,
    handles: Vec<std::thread::JoinHandle<()>>,
}

impl AdapterSet {
    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        // Blocking reader threads (stdin, websocket) may only notice the
        // flag on their next message; do not join those.
        drop(self.handles);
    }
}

/// Spawn one thread per pending live source, all feeding `queue`.
/// Manual sources need no thread: they are pushed by name from the repl.
pub fn spawn_adapters(pending: Vec<PendingSource>, queue: EventQueue) -> AdapterSet {
    let stop = Arc::new(AtomicBool::new(false));
    let mut handles = Vec::new();
    for p in pending {
        let queue = queue.clone();
        let stop = stop.clone();
        match p.kind {
            PendingSourceKind::Manual { .. } => {}
            PendingSourceKind::Timer { period_ms } => {
                handles.push(std::thread::spawn(move || {
                    let mut tick: i64 = 0;
                    while !stop.load(Ordering::SeqCst) && !queue.is_closed() {
                        std::thread::sleep(Duration::from_millis(period_ms));
                        queue.push(ExternalEvent {
                            signal: p.signal,
                            value: serde_json::Value::from(tick),
                        });
                        tick += 1;
                    }
                }));
            }
            PendingSourceKind::StdinLines => {
                handles.push(std::thread::spawn(move || {
                    let stdin = std::io::stdin();
                    for line in stdin.lock().lines() {
                        let Ok(line) = line else { break };
                        if stop.load(Ordering::SeqCst) || queue.is_closed() {
                            break;
                        }
                        queue.push(ExternalEvent {
                            signal: p.signal,
                            value: serde_json::Value::from(line.as_str()),
                        });
                    }
                }));
            }
            PendingSourceKind::WsIn { address } => {
                handles.push(std::thread::spawn(move || {
                    let Ok((mut socket, _)) = tungstenite::connect(&address) else {
                        eprintln!("ws-in: could not connect to {address}");
                        return;
                    };
                    loop {
                        if stop.load(Ordering::SeqCst) || queue.is_closed() {
                            break;
                        }
                        match socket.read() {
                            Ok(msg) if msg.is_text() => {
                                let text = msg.into_text().unwrap_or_default();
                                let value = serde_json::from_str::<serde_json::Value>(&text)
                                    .unwrap_or_else(|_| serde_json::Value::from(text.as_str()));
                                queue.push(ExternalEvent {
                                    signal: p.signal,
                                    value,
                                });
                            }
                            Ok(_) => {}
                            Err(_) => break,
                        }
                    }
                }));
            }
        }
    }
    AdapterSet { stop, handles }
}

// ----- sink handlers -------------------------------------------------------

enum SinkTarget {
    Collect(std::rc::Rc<std::cell::RefCell<Vec<Value>>>),
    Stdout { name: String },
    Ws(Box<WsOut>),
}

struct WsOut {
    address: String,
    socket: Option<tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<std::net::TcpStream>>>,
}

impl WsOut {
    /// Send with reconnect: up to three attempts, then the value is dropped.
    fn send(&mut self, value: &Value) {
        let text = value.to_json().to_string();
        for _ in 0..3 {
            if self.socket.is_none() {
                self.socket = tungstenite::connect(&self.address).ok().map(|(s, _)| s);
            }
            if let Some(sock) = &mut self.socket {
                if sock.send(tungstenite::Message::text(text.clone())).is_ok() {
                    return;
                }
                self.socket = None;
            }
        }
        eprintln!("ws-out: dropped value after 3 attempts to {}", self.address);
    }
}

/// Observes sink signals after every turn and forwards fresh emissions.
#[derive(Default)]
pub struct SinkSet {
    entries: Vec<(SignalId, SinkTarget)>,
}

impl SinkSet {
    pub fn new() -> SinkSet {
        SinkSet::default()
    }

    /// Attach an in-memory collector; returns the shared buffer.
    pub fn collect(&mut self, signal: SignalId) -> std::rc::Rc<std::cell::RefCell<Vec<Value>>> {
        let buf = std::rc::Rc::new(std::cell::RefCell::new(Vec::new()));
        self.entries.push((signal, SinkTarget::Collect(buf.clone())));
        buf
    }

    pub fn stdout(&mut self, signal: SignalId, name: &str) {
        self.entries.push((
            signal,
            SinkTarget::Stdout {
                name: name.to_string(),
            },
        ));
    }

    pub fn ws_out(&mut self, signal: SignalId, address: &str) {
        self.entries.push((
            signal,
            SinkTarget::Ws(Box::new(WsOut {
                address: address.to_string(),
                socket: None,
            })),
        ));
    }

    /// Forward every sink value emitted during the turn just sealed.
    pub fn after_turn(&mut self, engine: &Engine, report: &TurnReport) {
        for (signal, target) in &mut self.entries {
            let node = engine.signal(*signal);
            if node.last_emit_turn != Some(report.turn) {
                continue;
            }
            let Some(value) = node.current.clone() else {
                continue;
            };
            match target {
                SinkTarget::Collect(buf) => buf.borrow_mut().push(value),
                SinkTarget::Stdout { name } => println!("{name} = {value}"),
                SinkTarget::Ws(ws) => ws.send(&value),
            }
        }
    }
}
