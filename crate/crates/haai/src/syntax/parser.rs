//! Parser: datum trees into the Haai AST.

use std::collections::HashSet;
use std::rc::Rc;

use super::{
    is_reserved, Datum, DatumKind, Definition, Expr, ExprKind, Lit, Program, ReactorDef, RhoBody,
    SignalDef, SyntaxError,
};

/// Parse every top-level datum as a `defr` or `def` form.
pub fn parse_program(data: &[Datum]) -> Result<Program, SyntaxError> {
    let mut definitions = Vec::new();
    let mut reactor_names: HashSet<String> = HashSet::new();
    for datum in data {
        let def = parse_definition(datum)?;
        if let Definition::Reactor(r) = &def {
            if !reactor_names.insert(r.name.clone()) {
                return Err(SyntaxError::DuplicateReactor {
                    span: r.span.clone(),
                    name: r.name.clone(),
                });
            }
        }
        definitions.push(def);
    }
    Ok(Program { definitions })
}

fn parse_definition(datum: &Datum) -> Result<Definition, SyntaxError> {
    let items = datum.as_list().ok_or_else(|| SyntaxError::NotADefinition {
        span: datum.span.clone(),
    })?;
    match items.first().and_then(|d| d.as_symbol()) {
        Some("defr") => Ok(Definition::Reactor(Rc::new(parse_defr(datum, items)?))),
        Some("def") => Ok(Definition::Signal(parse_def(datum, items)?)),
        _ => Err(SyntaxError::NotADefinition {
            span: datum.span.clone(),
        }),
    }
}

/// `(defr (name param+ [| (tramp init)+]) body...)`
fn parse_defr(datum: &Datum, items: &[Datum]) -> Result<ReactorDef, SyntaxError> {
    let malformed = || SyntaxError::MalformedDefr {
        span: datum.span.clone(),
    };
    if items.len() < 3 {
        return Err(malformed());
    }
    let header = items[1].as_list().ok_or_else(malformed)?;
    if header.is_empty() {
        return Err(malformed());
    }
    let name = parse_identifier(&header[0])?;

    // Split the header on `|`: params before, trampoline declarations after.
    let bar = header.iter().position(|d| d.as_symbol() == Some("|"));
    let (param_data, tramp_data) = match bar {
        Some(i) => (&header[1..i], &header[i + 1..]),
        None => (&header[1..], &header[..0]),
    };
    if param_data.is_empty() {
        return Err(malformed());
    }
    if bar.is_some() && tramp_data.is_empty() {
        return Err(SyntaxError::BarWithoutTrampolines {
            span: datum.span.clone(),
        });
    }

    let mut params = Vec::new();
    for d in param_data {
        params.push(parse_identifier(d)?);
    }
    let mut trampolines = Vec::new();
    for d in tramp_data {
        let pair = d.as_list().ok_or_else(malformed)?;
        if pair.len() != 2 {
            return Err(malformed());
        }
        let tname = parse_identifier(&pair[0])?;
        let init = parse_expression(&pair[1])?;
        trampolines.push((tname, init));
    }

    // Param and trampoline names must be pairwise distinct.
    let mut seen = HashSet::new();
    for (n, span) in params
        .iter()
        .zip(param_data.iter().map(|d| &d.span))
        .chain(
            trampolines
                .iter()
                .map(|(n, _)| n)
                .zip(tramp_data.iter().map(|d| &d.span)),
        )
    {
        if !seen.insert(n.clone()) {
            return Err(SyntaxError::DuplicateParam {
                span: span.clone(),
                name: n.clone(),
            });
        }
    }

    let body = parse_body(datum, &items[2..], !trampolines.is_empty())?;
    if !trampolines.is_empty() && body.updates.is_empty() {
        return Err(SyntaxError::MissingTrampolineUpdates {
            span: datum.span.clone(),
        });
    }
    if body.updates.len() != trampolines.len() && !trampolines.is_empty() {
        return Err(SyntaxError::MissingTrampolineUpdates {
            span: datum.span.clone(),
        });
    }

    Ok(ReactorDef {
        name,
        params,
        trampolines,
        body_defs: body.defs,
        sinks: body.sinks,
        trampoline_updates: body.updates,
        span: datum.span.clone(),
    })
}

struct Body {
    defs: Vec<SignalDef>,
    sinks: Vec<Expr>,
    updates: Vec<Expr>,
}

/// A body is `def*` followed by either an `(out sink+ [| update+])` form or a
/// single trailing expression which becomes the single sink.
fn parse_body(owner: &Datum, forms: &[Datum], allow_bar: bool) -> Result<Body, SyntaxError> {
    let malformed = || SyntaxError::MalformedDefr {
        span: owner.span.clone(),
    };
    let mut defs = Vec::new();
    let mut rest = forms;
    while let Some(first) = rest.first() {
        let is_def = first
            .as_list()
            .and_then(|l| l.first())
            .and_then(|d| d.as_symbol())
            == Some("def");
        if !is_def {
            break;
        }
        defs.push(parse_def(first, first.as_list().unwrap())?);
        rest = &rest[1..];
    }
    if rest.len() != 1 {
        return Err(malformed());
    }
    let last = &rest[0];
    let is_out = last
        .as_list()
        .and_then(|l| l.first())
        .and_then(|d| d.as_symbol())
        == Some("out");
    if !is_out {
        return Ok(Body {
            defs,
            sinks: vec![parse_expression(last)?],
            updates: Vec::new(),
        });
    }
    let out_items = &last.as_list().unwrap()[1..];
    let bar = out_items.iter().position(|d| d.as_symbol() == Some("|"));
    let (sink_data, update_data) = match bar {
        Some(i) => {
            if !allow_bar {
                return Err(SyntaxError::BarWithoutTrampolines {
                    span: last.span.clone(),
                });
            }
            (&out_items[..i], &out_items[i + 1..])
        }
        None => (out_items, &out_items[..0]),
    };
    if sink_data.is_empty() || (bar.is_some() && update_data.is_empty()) {
        return Err(malformed());
    }
    Ok(Body {
        defs,
        sinks: sink_data
            .iter()
            .map(parse_expression)
            .collect::<Result<_, _>>()?,
        updates: update_data
            .iter()
            .map(parse_expression)
            .collect::<Result<_, _>>()?,
    })
}

/// `(def name expr)` or `(def (name+) expr)`
fn parse_def(datum: &Datum, items: &[Datum]) -> Result<SignalDef, SyntaxError> {
    let malformed = || SyntaxError::MalformedDef {
        span: datum.span.clone(),
    };
    if items.len() != 3 {
        return Err(malformed());
    }
    let targets = match &items[1].kind {
        DatumKind::Symbol(_) => vec![parse_identifier(&items[1])?],
        DatumKind::List(names) => {
            if names.is_empty() {
                return Err(malformed());
            }
            names
                .iter()
                .map(parse_identifier)
                .collect::<Result<Vec<_>, _>>()?
        }
        _ => return Err(malformed()),
    };
    let mut seen = HashSet::new();
    for t in &targets {
        if !seen.insert(t.clone()) {
            return Err(SyntaxError::DuplicateParam {
                span: datum.span.clone(),
                name: t.clone(),
            });
        }
    }
    let expr = parse_expression(&items[2])?;
    if targets.len() > 1 && !matches!(expr.kind, ExprKind::Deploy { .. }) {
        return Err(malformed());
    }
    Ok(SignalDef {
        targets,
        expr,
        span: datum.span.clone(),
    })
}

fn parse_identifier(datum: &Datum) -> Result<String, SyntaxError> {
    match datum.as_symbol() {
        Some(s) if !is_reserved(s) => Ok(s.to_string()),
        _ => Err(SyntaxError::MalformedDefr {
            span: datum.span.clone(),
        }),
    }
}

/// Parse one datum as an expression.
pub fn parse_expression(datum: &Datum) -> Result<Expr, SyntaxError> {
    let span = datum.span.clone();
    let kind = match &datum.kind {
        DatumKind::Symbol(s) => ExprKind::Var(s.clone()),
        DatumKind::Int(i) => ExprKind::Literal(Lit::Int(*i)),
        DatumKind::Float(f) => ExprKind::Literal(Lit::Float(*f)),
        DatumKind::Bool(b) => ExprKind::Literal(Lit::Bool(*b)),
        DatumKind::Str(s) => ExprKind::Literal(Lit::Str(s.clone())),
        DatumKind::List(items) => match items.first().and_then(|d| d.as_symbol()) {
            Some("if") => {
                if items.len() != 4 {
                    return Err(SyntaxError::MalformedIf { span });
                }
                ExprKind::If {
                    cond: Box::new(parse_expression(&items[1])?),
                    consequent: Box::new(parse_expression(&items[2])?),
                    alternate: Box::new(parse_expression(&items[3])?),
                }
            }
            Some("rho") => ExprKind::Rho(Rc::new(parse_rho(datum, items)?)),
            _ => {
                if items.is_empty() {
                    return Err(SyntaxError::EmptyDeploy { span });
                }
                ExprKind::Deploy {
                    operator: Box::new(parse_expression(&items[0])?),
                    operands: items[1..]
                        .iter()
                        .map(parse_expression)
                        .collect::<Result<_, _>>()?,
                }
            }
        },
    };
    Ok(Expr { kind, span })
}

/// `(rho (param*) body...)` — zero params permitted for pure captures.
fn parse_rho(datum: &Datum, items: &[Datum]) -> Result<RhoBody, SyntaxError> {
    let malformed = || SyntaxError::MalformedRho {
        span: datum.span.clone(),
    };
    if items.len() < 3 {
        return Err(malformed());
    }
    let param_data = items[1].as_list().ok_or_else(malformed)?;
    let mut params = Vec::new();
    let mut seen = HashSet::new();
    for d in param_data {
        let p = parse_identifier(d).map_err(|_| malformed())?;
        if !seen.insert(p.clone()) {
            return Err(SyntaxError::DuplicateParam {
                span: d.span.clone(),
                name: p,
            });
        }
        params.push(p);
    }
    let body = parse_body(datum, &items[2..], false).map_err(|e| match e {
        SyntaxError::MalformedDefr { span } => SyntaxError::MalformedRho { span },
        other => other,
    })?;
    Ok(RhoBody {
        params,
        body_defs: body.defs,
        sinks: body.sinks,
        span: datum.span.clone(),
    })
}
