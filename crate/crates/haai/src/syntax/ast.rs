//! The parsed Haai AST.

use std::rc::Rc;

use super::SourceSpan;

/// A whole program: an ordered sequence of definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub definitions: Vec<Definition>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Definition {
    Reactor(Rc<ReactorDef>),
    Signal(SignalDef),
}

/// `(defr (name param+ [| (tramp init)+]) def* sinks)`
#[derive(Debug, Clone, PartialEq)]
pub struct ReactorDef {
    pub name: String,
    pub params: Vec<String>,
    pub trampolines: Vec<(String, Expr)>,
    pub body_defs: Vec<SignalDef>,
    pub sinks: Vec<Expr>,
    pub trampoline_updates: Vec<Expr>,
    pub span: SourceSpan,
}

/// `(def name expr)` or `(def (name+) expr)` for multi-sink deployments.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDef {
    pub targets: Vec<String>,
    pub expr: Expr,
    pub span: SourceSpan,
}

/// The body of a `rho` expression: like a reactor body, without trampolines.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoBody {
    pub params: Vec<String>,
    pub body_defs: Vec<SignalDef>,
    pub sinks: Vec<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Var(String),
    Literal(Lit),
    Deploy {
        operator: Box<Expr>,
        operands: Vec<Expr>,
    },
    If {
        cond: Box<Expr>,
        consequent: Box<Expr>,
        alternate: Box<Expr>,
    },
    Rho(Rc<RhoBody>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Program {
    /// Look up a reactor definition by name.
    pub fn reactor(&self, name: &str) -> Option<&Rc<ReactorDef>> {
        self.definitions.iter().find_map(|d| match d {
            Definition::Reactor(r) if r.name == name => Some(r),
            _ => None,
        })
    }
}
