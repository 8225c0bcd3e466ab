//! Lexical environments mapping identifiers to signals or reactor values.
//!
//! Lookup resolves innermost-first; the engine consults the reactor table
//! only after every frame in the chain has missed.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::syntax::{Expr, ExprKind, RhoBody, SignalDef};
use crate::value::Binding;

#[derive(Debug, Clone)]
pub struct Env(Rc<EnvNode>);

#[derive(Debug)]
struct EnvNode {
    // RefCell: frames grow as body definitions are evaluated in order.
    frame: RefCell<HashMap<String, Binding>>,
    parent: Option<Env>,
}

impl Env {
    pub fn root() -> Env {
        Env(Rc::new(EnvNode {
            frame: RefCell::new(HashMap::new()),
            parent: None,
        }))
    }

    pub fn child(&self) -> Env {
        Env(Rc::new(EnvNode {
            frame: RefCell::new(HashMap::new()),
            parent: Some(self.clone()),
        }))
    }

    pub fn define(&self, name: &str, binding: Binding) {
        self.0.frame.borrow_mut().insert(name.to_string(), binding);
    }

    pub fn lookup(&self, name: &str) -> Option<Binding> {
        let mut node = Some(&self.0);
        while let Some(n) = node {
            if let Some(b) = n.frame.borrow().get(name) {
                return Some(b.clone());
            }
            node = n.parent.as_ref().map(|e| &e.0);
        }
        None
    }
}

/// Identifiers referenced by a rho body that are not bound by its params or
/// internal definitions. Sorted for deterministic capture order.
pub fn free_identifiers(rho: &RhoBody) -> Vec<String> {
    let mut bound: Vec<String> = rho.params.clone();
    let mut free = std::collections::BTreeSet::new();
    scan_body(&rho.body_defs, &rho.sinks, &mut bound, &mut free);
    free.into_iter().collect()
}

fn scan_body(
    defs: &[SignalDef],
    sinks: &[Expr],
    bound: &mut Vec<String>,
    free: &mut std::collections::BTreeSet<String>,
) {
    let depth = bound.len();
    for d in defs {
        scan_expr(&d.expr, bound, free);
        bound.extend(d.targets.iter().cloned());
    }
    for s in sinks {
        scan_expr(s, bound, free);
    }
    bound.truncate(depth);
}

fn scan_expr(expr: &Expr, bound: &mut Vec<String>, free: &mut std::collections::BTreeSet<String>) {
    match &expr.kind {
        ExprKind::Var(name) => {
            if !bound.iter().any(|b| b == name) {
                free.insert(name.clone());
            }
        }
        ExprKind::Literal(_) => {}
        ExprKind::Deploy { operator, operands } => {
            scan_expr(operator, bound, free);
            for a in operands {
                scan_expr(a, bound, free);
            }
        }
        ExprKind::If {
            cond,
            consequent,
            alternate,
        } => {
            scan_expr(cond, bound, free);
            scan_expr(consequent, bound, free);
            scan_expr(alternate, bound, free);
        }
        ExprKind::Rho(inner) => {
            let depth = bound.len();
            bound.extend(inner.params.iter().cloned());
            scan_body(&inner.body_defs, &inner.sinks, bound, free);
            bound.truncate(depth);
        }
    }
}
