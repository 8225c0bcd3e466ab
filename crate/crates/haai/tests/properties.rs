//! Property tests: printer/parser round-tripping over generated programs and
//! trampoline behaviour against straight-line oracles.

use std::rc::Rc;

use proptest::prelude::*;

use haai::syntax::{
    parse_program, print_program, read_data, Definition, Expr, ExprKind, Lit, Program, ReactorDef,
    RhoBody, SignalDef, SourceSpan,
};
use haai::Value;

fn span() -> SourceSpan {
    SourceSpan::new("<gen>", 1, 1, 0)
}

fn expr(kind: ExprKind) -> Expr {
    Expr { kind, span: span() }
}

fn ident() -> impl Strategy<Value = String> {
    // Keep identifiers inside the reader's lexical rules.
    "[a-z][a-z0-9?-]{0,6}".prop_filter("reserved words", |s| {
        !matches!(s.as_str(), "def" | "defr" | "if" | "rho" | "out")
    })
}

fn literal() -> impl Strategy<Value = Lit> {
    prop_oneof![
        any::<i64>().prop_map(Lit::Int),
        // Finite floats only; the printer has no spelling for NaN/inf.
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(Lit::Float),
        any::<bool>().prop_map(Lit::Bool),
        "[ -~]{0,12}".prop_map(Lit::Str),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        ident().prop_map(|v| expr(ExprKind::Var(v))),
        literal().prop_map(|l| expr(ExprKind::Literal(l))),
    ];
    leaf.prop_recursive(4, 24, 4, |inner| {
        prop_oneof![
            (inner.clone(), prop::collection::vec(inner.clone(), 1..4)).prop_map(
                |(operator, operands)| expr(ExprKind::Deploy {
                    operator: Box::new(operator),
                    operands,
                })
            ),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| expr(
                ExprKind::If {
                    cond: Box::new(c),
                    consequent: Box::new(t),
                    alternate: Box::new(e),
                }
            )),
            (
                prop::collection::vec(ident(), 1..3),
                prop::collection::vec(inner, 1..3)
            )
                .prop_map(|(params, sinks)| expr(ExprKind::Rho(Rc::new(RhoBody {
                    params: unique_names(params),
                    body_defs: Vec::new(),
                    sinks,
                    span: span(),
                })))),
        ]
    })
}

/// Drop later duplicates so generated binder lists stay grammatical.
fn unique_names(names: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    names.into_iter().filter(|n| seen.insert(n.clone())).collect()
}

fn arb_signal_def() -> impl Strategy<Value = SignalDef> {
    (prop::collection::vec(ident(), 1..3), arb_expr()).prop_map(|(mut targets, expr)| {
        // Multi-target defs are only grammatical for deployments.
        if !matches!(expr.kind, ExprKind::Deploy { .. }) {
            targets.truncate(1);
        }
        targets.dedup();
        SignalDef {
            targets,
            expr,
            span: span(),
        }
    })
}

fn arb_reactor_def() -> impl Strategy<Value = ReactorDef> {
    (
        ident(),
        prop::collection::vec(ident(), 1..4),
        prop::collection::vec((ident(), arb_expr()), 0..2),
        prop::collection::vec(arb_signal_def(), 0..3),
        prop::collection::vec(arb_expr(), 1..3),
    )
        .prop_map(|(name, params, trampolines, body_defs, sinks)| {
            let params = unique_names(params);
            let mut taken: std::collections::HashSet<String> = params.iter().cloned().collect();
            let trampolines: Vec<(String, Expr)> = trampolines
                .into_iter()
                .filter(|(n, _)| taken.insert(n.clone()))
                .collect();
            let trampoline_updates = trampolines.iter().map(|_| sinks[0].clone()).collect();
            ReactorDef {
                name,
                params,
                trampolines,
                body_defs,
                sinks,
                trampoline_updates,
                span: span(),
            }
        })
}

fn arb_program() -> impl Strategy<Value = Program> {
    prop::collection::vec(
        prop_oneof![
            arb_reactor_def().prop_map(|r| Definition::Reactor(Rc::new(r))),
            arb_signal_def().prop_map(Definition::Signal),
        ],
        1..5,
    )
    .prop_map(|definitions| Program { definitions })
}

/// Strip spans so structural equality ignores source locations.
fn reprint(program: &Program) -> String {
    print_program(program)
}

proptest! {
    #[test]
    fn printed_programs_reparse_to_the_same_text(program in arb_program()) {
        let text = reprint(&program);
        let data = read_data("<prop>", &text)
            .unwrap_or_else(|e| panic!("printed program must lex: {e}\n{text}"));
        let parsed = parse_program(&data)
            .unwrap_or_else(|e| panic!("printed program must parse: {e}\n{text}"));
        prop_assert_eq!(reprint(&parsed), text);
    }

    #[test]
    fn pre_matches_a_one_turn_delay_oracle(inputs in prop::collection::vec(-10_000i64..10_000, 1..60)) {
        let mut engine = haai::stdlib::new_engine();
        let data = read_data("<prop>", "(def s (manual-in \"s\"))\n(def p (pre s 0))").unwrap();
        let program = parse_program(&data).unwrap();
        engine.load_program(&program);
        let p = engine.global_signal("p").unwrap();
        let mut seen = Vec::new();
        for v in &inputs {
            let report = engine.run_turn_named(&[("s", Value::Int(*v))]).unwrap();
            prop_assert!(report.errors.is_empty());
            // Observe what the delayed signal emitted this turn; by the time
            // the turn ends the trampoline has already committed the new value.
            let (lo, hi) = report.trace_range;
            let emitted = engine.trace_events()[lo..hi]
                .iter()
                .find(|e| e.kind == haai::engine::TraceKind::Emit && e.id == p.0)
                .map(|e| Value::from_json(&e.value).unwrap())
                .unwrap();
            seen.push(emitted);
        }
        let mut oracle = vec![Value::Int(0)];
        oracle.extend(inputs[..inputs.len() - 1].iter().map(|v| Value::Int(*v)));
        prop_assert_eq!(seen, oracle);
    }

    #[test]
    fn min_max_match_running_extrema(inputs in prop::collection::vec(-10_000i64..10_000, 1..60)) {
        let mut engine = haai::stdlib::new_engine();
        let data = read_data(
            "<prop>",
            "(def s (manual-in \"s\"))\n(def (mi ma) (min-max s))",
        )
        .unwrap();
        engine.load_program(&parse_program(&data).unwrap());
        let mi = engine.global_signal("mi").unwrap();
        let ma = engine.global_signal("ma").unwrap();
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for v in &inputs {
            engine.run_turn_named(&[("s", Value::Int(*v))]).unwrap();
            lo = lo.min(*v);
            hi = hi.max(*v);
            prop_assert_eq!(engine.signal_value(mi), Some(&Value::Int(lo)));
            prop_assert_eq!(engine.signal_value(ma), Some(&Value::Int(hi)));
        }
    }
}
