//! Canonical S-expression printing for parsed programs.
//!
//! Printing a parsed program and re-parsing the output yields a structurally
//! identical program (modulo spans), which the property tests rely on.

use std::fmt::Write;

use super::{Definition, Expr, ExprKind, Lit, Program, ReactorDef, RhoBody, SignalDef};

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for def in &program.definitions {
        match def {
            Definition::Reactor(r) => print_reactor(&mut out, r),
            Definition::Signal(d) => print_def(&mut out, d),
        }
        out.push('\n');
    }
    out
}

fn print_reactor(out: &mut String, r: &ReactorDef) {
    write!(out, "(defr ({}", r.name).unwrap();
    for p in &r.params {
        write!(out, " {p}").unwrap();
    }
    if !r.trampolines.is_empty() {
        out.push_str(" |");
        for (name, init) in &r.trampolines {
            write!(out, " ({name} {})", print_expr(init)).unwrap();
        }
    }
    out.push(')');
    for d in &r.body_defs {
        out.push(' ');
        print_def(out, d);
    }
    out.push_str(" (out");
    for s in &r.sinks {
        write!(out, " {}", print_expr(s)).unwrap();
    }
    if !r.trampoline_updates.is_empty() {
        out.push_str(" |");
        for u in &r.trampoline_updates {
            write!(out, " {}", print_expr(u)).unwrap();
        }
    }
    out.push_str("))");
}

fn print_def(out: &mut String, d: &SignalDef) {
    if d.targets.len() == 1 {
        write!(out, "(def {} {})", d.targets[0], print_expr(&d.expr)).unwrap();
    } else {
        write!(out, "(def ({}) {})", d.targets.join(" "), print_expr(&d.expr)).unwrap();
    }
}

fn print_rho(out: &mut String, r: &RhoBody) {
    write!(out, "(rho ({})", r.params.join(" ")).unwrap();
    for d in &r.body_defs {
        out.push(' ');
        print_def(out, d);
    }
    out.push_str(" (out");
    for s in &r.sinks {
        write!(out, " {}", print_expr(s)).unwrap();
    }
    out.push_str("))");
}

pub fn print_expr(expr: &Expr) -> String {
    let mut out = String::new();
    match &expr.kind {
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::Literal(lit) => match lit {
            Lit::Int(i) => write!(out, "{i}").unwrap(),
            Lit::Float(f) => write!(out, "{f:?}").unwrap(),
            Lit::Bool(true) => out.push_str("#t"),
            Lit::Bool(false) => out.push_str("#f"),
            Lit::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
        },
        ExprKind::Deploy { operator, operands } => {
            out.push('(');
            out.push_str(&print_expr(operator));
            for a in operands {
                write!(out, " {}", print_expr(a)).unwrap();
            }
            out.push(')');
        }
        ExprKind::If {
            cond,
            consequent,
            alternate,
        } => {
            write!(
                out,
                "(if {} {} {})",
                print_expr(cond),
                print_expr(consequent),
                print_expr(alternate)
            )
            .unwrap();
        }
        ExprKind::Rho(r) => print_rho(&mut out, r),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, read_data};

    fn roundtrip(text: &str) {
        let p1 = parse_program(&read_data("<a>", text).unwrap()).unwrap();
        let printed = print_program(&p1);
        let p2 = parse_program(&read_data("<b>", &printed).unwrap()).unwrap();
        assert!(structurally_equal(&p1, &p2), "roundtrip failed:\n{printed}");
    }

    // Structural comparison ignoring spans, via re-printing.
    fn structurally_equal(a: &Program, b: &Program) -> bool {
        print_program(a) == print_program(b)
    }

    #[test]
    fn roundtrips_representative_programs() {
        roundtrip("(defr (to-celsius k) (- k 273.15))");
        roundtrip("(defr (sum-and-product a b) (def s (+ a b)) (def p (* a b)) (out s p))");
        roundtrip("(defr (pre s init | (acc init)) (out acc | s))");
        roundtrip("(defr (collatz-step n) (if (even? n) (/ n 2) (+ (* n 3) 1)))");
        roundtrip(
            "(defr (make-temp-locale in-celsius) (rho (temp) (if in-celsius (to-celsius temp) (to-fahrenheit temp))))",
        );
        roundtrip("(def x (manual-in \"x\")) (def (s p) (sum-and-product x x))");
        roundtrip("(def s \"a\\\"b\\n\") (def b #t) (def f 2.5)");
    }
}
