//! Language front-end: S-expression reader and program parser.

mod ast;
mod parser;
mod printer;
mod reader;

pub use ast::{Definition, Expr, ExprKind, Lit, Program, ReactorDef, RhoBody, SignalDef};
pub use parser::{parse_expression, parse_program};
pub use printer::{print_expr, print_program};
pub use reader::read_data;

use std::fmt;

/// Location of a datum or expression in the originating source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(file: &str, line: u32, column: u32, length: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        SourceSpan {
            file: file.to_string(),
            line,
            column,
            length,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// A raw S-expression datum with its source location.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumKind {
    Symbol(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    List(Vec<Datum>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Datum {
    pub kind: DatumKind,
    pub span: SourceSpan,
}

impl Datum {
    pub fn as_symbol(&self) -> Option<&str> {
        match &self.kind {
            DatumKind::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Datum]> {
        match &self.kind {
            DatumKind::List(items) => Some(items),
            _ => None,
        }
    }
}

/// Errors produced by the reader or parser.
#[derive(Debug, Clone, thiserror::Error)]
pub enum SyntaxError {
    #[error("{span}: unbalanced parentheses")]
    UnbalancedParens { span: SourceSpan },
    #[error("{span}: invalid number literal `{text}`")]
    InvalidNumber { span: SourceSpan, text: String },
    #[error("{span}: unterminated string literal")]
    UnterminatedString { span: SourceSpan },
    #[error("{span}: top-level form is not a definition")]
    NotADefinition { span: SourceSpan },
    #[error("{span}: malformed reactor definition")]
    MalformedDefr { span: SourceSpan },
    #[error("{span}: malformed signal definition")]
    MalformedDef { span: SourceSpan },
    #[error("{span}: duplicate parameter or trampoline name `{name}`")]
    DuplicateParam { span: SourceSpan, name: String },
    #[error("{span}: duplicate reactor name `{name}`")]
    DuplicateReactor { span: SourceSpan, name: String },
    #[error("{span}: `|` used without trampoline declarations")]
    BarWithoutTrampolines { span: SourceSpan },
    #[error("{span}: trampolines declared but no `|` update expressions in sinks")]
    MissingTrampolineUpdates { span: SourceSpan },
    #[error("{span}: `if` requires exactly three sub-expressions")]
    MalformedIf { span: SourceSpan },
    #[error("{span}: malformed `rho` expression")]
    MalformedRho { span: SourceSpan },
    #[error("{span}: empty deployment expression")]
    EmptyDeploy { span: SourceSpan },
}

impl SyntaxError {
    pub fn span(&self) -> &SourceSpan {
        match self {
            SyntaxError::UnbalancedParens { span }
            | SyntaxError::InvalidNumber { span, .. }
            | SyntaxError::UnterminatedString { span }
            | SyntaxError::NotADefinition { span }
            | SyntaxError::MalformedDefr { span }
            | SyntaxError::MalformedDef { span }
            | SyntaxError::DuplicateParam { span, .. }
            | SyntaxError::DuplicateReactor { span, .. }
            | SyntaxError::BarWithoutTrampolines { span }
            | SyntaxError::MissingTrampolineUpdates { span }
            | SyntaxError::MalformedIf { span }
            | SyntaxError::MalformedRho { span }
            | SyntaxError::EmptyDeploy { span } => span,
        }
    }
}

/// Reserved words that can never be used as identifiers.
pub const RESERVED: &[&str] = &["defr", "def", "out", "if", "rho", "|"];

pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}
