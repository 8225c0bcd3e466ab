//! Runtime values flowing over signals, and first-class reactor values.

use std::fmt;
use std::rc::Rc;

use crate::syntax::{ReactorDef, RhoBody};

/// Identifies a signal node in the engine's graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalId(pub u32);

/// Identifies a deployment in the engine's graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeploymentId(pub u32);

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for DeploymentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

/// A value carried by a signal. Values are immutable once constructed; the
/// standard library exposes no mutators.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Rc<str>),
    Pair(Rc<(Value, Value)>),
    Vector(Rc<[Value]>),
    Reactor(ReactorValue),
}

impl Value {
    pub fn string(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    /// Everything except `#f` counts as true in conditionals.
    pub fn is_truthy(&self) -> bool {
        !matches!(self, Value::Bool(false))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) | Value::Float(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
            Value::Pair(_) => "pair",
            Value::Vector(_) => "vector",
            Value::Reactor(_) => "reactor",
        }
    }

    /// JSON form used in traces and on the WebSocket wire.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Float(f) => serde_json::Value::from(*f),
            Value::Bool(b) => serde_json::Value::from(*b),
            Value::Str(s) => serde_json::Value::from(s.as_ref()),
            Value::Pair(p) => serde_json::Value::Array(vec![p.0.to_json(), p.1.to_json()]),
            Value::Vector(v) => serde_json::Value::Array(v.iter().map(Value::to_json).collect()),
            Value::Reactor(r) => serde_json::Value::from(format!("#<reactor {}>", r.name())),
        }
    }

    /// Decode a JSON value from the wire or a replay script.
    pub fn from_json(json: &serde_json::Value) -> Option<Value> {
        match json {
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Some(Value::Int(i))
                } else {
                    n.as_f64().map(Value::Float)
                }
            }
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::String(s) => Some(Value::string(s)),
            serde_json::Value::Array(items) => {
                let vals: Option<Vec<Value>> = items.iter().map(Value::from_json).collect();
                vals.map(|v| Value::Vector(Rc::from(v)))
            }
            _ => None,
        }
    }
}

/// Structural equality for data, identity (uid) equality for reactors.
impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Pair(a), Value::Pair(b)) => a.0 == b.0 && a.1 == b.1,
            (Value::Vector(a), Value::Vector(b)) => a == b,
            (Value::Reactor(a), Value::Reactor(b)) => a.uid == b.uid,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Bool(true) => write!(f, "#t"),
            Value::Bool(false) => write!(f, "#f"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Pair(p) => write!(f, "({} . {})", p.0, p.1),
            Value::Vector(v) => {
                write!(f, "#(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            Value::Reactor(r) => write!(f, "#<reactor {}>", r.name()),
        }
    }
}

/// A runtime error raised by a primitive transformer (division by zero, type
/// errors). Poisons the affected signal for the current turn only.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct PrimError(pub String);

/// A built-in primitive reactor: a pure, referentially transparent value
/// transformer with a single sink.
pub struct PrimitiveSpec {
    pub name: &'static str,
    pub min_arity: usize,
    pub max_arity: Option<usize>,
    pub constant_time: bool,
    pub apply: fn(&[Value]) -> Result<Value, PrimError>,
}

impl PrimitiveSpec {
    pub fn accepts_arity(&self, n: usize) -> bool {
        n >= self.min_arity && self.max_arity.is_none_or(|max| n <= max)
    }
}

impl fmt::Debug for PrimitiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrimitiveSpec({})", self.name)
    }
}

/// Kinds of IO reactors handled by the io-boundary rather than the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IoKind {
    WsIn,
    WsOut,
    Timer,
    StdinLines,
    ManualIn,
}

#[derive(Debug, Clone)]
pub struct IoSpec {
    pub name: &'static str,
    pub kind: IoKind,
}

/// An identifier binding: either a signal in the graph or a reactor value.
#[derive(Debug, Clone)]
pub enum Binding {
    Signal(SignalId),
    Reactor(ReactorValue),
}

/// A capture: the runtime representation of a `rho` expression plus a
/// snapshot of the signals and reactors its body references freely.
#[derive(Debug)]
pub struct CaptureData {
    pub rho: Rc<RhoBody>,
    pub captured: Vec<(String, Binding)>,
}

impl CaptureData {
    pub fn implicit_sources(&self) -> Vec<SignalId> {
        self.captured
            .iter()
            .filter_map(|(_, b)| match b {
                Binding::Signal(s) => Some(*s),
                Binding::Reactor(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum ReactorKind {
    Primitive(Rc<PrimitiveSpec>),
    Named(Rc<ReactorDef>),
    Capture(Rc<CaptureData>),
    Io(Rc<IoSpec>),
}

/// A first-class reactor value. Identity (`uid`) is unique per construction;
/// two captures of the same `rho` text are distinct values.
#[derive(Debug, Clone)]
pub struct ReactorValue {
    pub uid: u64,
    pub kind: ReactorKind,
}

impl ReactorValue {
    pub fn name(&self) -> String {
        match &self.kind {
            ReactorKind::Primitive(p) => p.name.to_string(),
            ReactorKind::Named(r) => r.name.clone(),
            ReactorKind::Capture(_) => format!("rho#{}", self.uid),
            ReactorKind::Io(io) => io.name.to_string(),
        }
    }

    /// Number of argument signals a deployment of this reactor requires.
    pub fn arity(&self) -> Option<usize> {
        match &self.kind {
            ReactorKind::Primitive(_) => None, // range-checked instead
            ReactorKind::Named(r) => Some(r.params.len()),
            ReactorKind::Capture(c) => Some(c.rho.params.len()),
            ReactorKind::Io(_) => None,
        }
    }

    pub fn sink_count(&self) -> usize {
        match &self.kind {
            ReactorKind::Primitive(_) | ReactorKind::Io(_) => 1,
            ReactorKind::Named(r) => r.sinks.len(),
            ReactorKind::Capture(c) => c.rho.sinks.len(),
        }
    }
}
