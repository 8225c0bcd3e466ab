//! Static analysis over parsed programs: reactivity-tier classification,
//! recursion detection, and reactor graph export.
//!
//! Everything here is a static approximation computed on the AST; no engine
//! is involved and analysis never fails on a parsed program.

mod graphviz;

pub use graphviz::{export_graph, GraphError, GraphIr, GraphNode, NodeShape, Region};

use std::collections::{HashMap, HashSet};

use petgraph::graph::DiGraph;

use crate::syntax::{Definition, Expr, ExprKind, Program, ReactorDef, SignalDef};

/// Reactivity guarantee tiers, weakest-feature-wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum ReactivityTier {
    Strong,
    Eventual,
    Weak,
}

impl std::fmt::Display for ReactivityTier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReactivityTier::Strong => write!(f, "Strong"),
            ReactivityTier::Eventual => write!(f, "Eventual"),
            ReactivityTier::Weak => write!(f, "Weak"),
        }
    }
}

/// Syntactic features detected in a program.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct FeatureReport {
    pub uses_trampolines: bool,
    pub uses_conditionals: bool,
    pub uses_dynamic_operators: bool,
    /// One cycle per strongly connected component of the reactor-reference
    /// graph; covers self-loops and mutual recursion.
    pub recursion_cycles: Vec<Vec<String>>,
    pub rho_count: usize,
    /// Source locations of syntactic `(x x)` self-applications.
    pub self_application_sites: Vec<String>,
    pub non_constant_time_primitives: Vec<String>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Classification {
    pub tier: ReactivityTier,
    /// Human-readable lines explaining why the tier was assigned. The answer
    /// is a static approximation: dataflow that hides reactors in data
    /// structures can evade the occurs-check.
    pub justification: Vec<String>,
    pub features: FeatureReport,
}

/// Names of prelude reactors that carry trampoline state. Referencing them
/// makes a program stateful even though their `defr`s live in the prelude.
const STATEFUL_PRELUDE: &[&str] = &["pre", "min-max"];

/// Classify a program into a reactivity tier from its detected features.
pub fn classify(program: &Program) -> Classification {
    let features = detect_features(program);
    let mut justification = Vec::new();
    let tier = if !features.recursion_cycles.is_empty()
        || !features.self_application_sites.is_empty()
    {
        for cycle in &features.recursion_cycles {
            justification.push(format!(
                "recursive deployment cycle: {}",
                cycle.join(" -> ")
            ));
        }
        for site in &features.self_application_sites {
            justification.push(format!("self-application `(x x)` at {site}"));
        }
        ReactivityTier::Weak
    } else if !features.non_constant_time_primitives.is_empty() {
        justification.push(format!(
            "non-constant-time primitives referenced: {}",
            features.non_constant_time_primitives.join(", ")
        ));
        ReactivityTier::Eventual
    } else {
        justification.push(
            "no recursion, no self-application, all primitives update in constant time"
                .to_string(),
        );
        ReactivityTier::Strong
    };
    Classification {
        tier,
        justification,
        features,
    }
}

pub fn detect_features(program: &Program) -> FeatureReport {
    let mut report = FeatureReport {
        recursion_cycles: detect_recursion(program),
        self_application_sites: detect_self_application(program),
        ..FeatureReport::default()
    };
    let slow: HashSet<&str> = crate::stdlib::primitive_specs()
        .iter()
        .filter(|s| !s.constant_time)
        .map(|s| s.name)
        .collect();
    let mut slow_seen: Vec<String> = Vec::new();
    let mut visit = |name: &str, report: &mut FeatureReport| {
        if slow.contains(name) && !slow_seen.iter().any(|s| s == name) {
            slow_seen.push(name.to_string());
        }
        if STATEFUL_PRELUDE.contains(&name) {
            report.uses_trampolines = true;
        }
    };
    for def in &program.definitions {
        match def {
            Definition::Reactor(r) => {
                if !r.trampolines.is_empty() {
                    report.uses_trampolines = true;
                }
                for init in r.trampolines.iter().map(|(_, e)| e) {
                    scan_features(init, &mut report, &mut visit);
                }
                scan_defs(&r.body_defs, &mut report, &mut visit);
                for e in r.sinks.iter().chain(r.trampoline_updates.iter()) {
                    scan_features(e, &mut report, &mut visit);
                }
            }
            Definition::Signal(d) => scan_features(&d.expr, &mut report, &mut visit),
        }
    }
    report.non_constant_time_primitives = slow_seen;
    report
}

fn scan_defs(
    defs: &[SignalDef],
    report: &mut FeatureReport,
    visit: &mut impl FnMut(&str, &mut FeatureReport),
) {
    for d in defs {
        scan_features(&d.expr, report, visit);
    }
}

fn scan_features(
    expr: &Expr,
    report: &mut FeatureReport,
    visit: &mut impl FnMut(&str, &mut FeatureReport),
) {
    match &expr.kind {
        ExprKind::Var(name) => visit(name, report),
        ExprKind::Literal(_) => {}
        ExprKind::If {
            cond,
            consequent,
            alternate,
        } => {
            report.uses_conditionals = true;
            scan_features(cond, report, visit);
            scan_features(consequent, report, visit);
            scan_features(alternate, report, visit);
        }
        ExprKind::Rho(rho) => {
            report.rho_count += 1;
            scan_defs(&rho.body_defs, report, visit);
            for s in &rho.sinks {
                scan_features(s, report, visit);
            }
        }
        ExprKind::Deploy { operator, operands } => {
            // An operator that is neither a bare identifier nor a rho is a
            // reactor-valued expression: a dynamic operator node at runtime.
            if !matches!(operator.kind, ExprKind::Var(_) | ExprKind::Rho(_)) {
                report.uses_dynamic_operators = true;
            }
            scan_features(operator, report, visit);
            for a in operands {
                scan_features(a, report, visit);
            }
        }
    }
}

/// Strongly connected components of the reactor-reference graph that contain
/// a cycle, in definition order. Edge A -> B when A's body mentions reactor
/// name B anywhere.
pub fn detect_recursion(program: &Program) -> Vec<Vec<String>> {
    let reactors: Vec<&ReactorDef> = program
        .definitions
        .iter()
        .filter_map(|d| match d {
            Definition::Reactor(r) => Some(r.as_ref()),
            Definition::Signal(_) => None,
        })
        .collect();
    let index: HashMap<&str, usize> = reactors
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.as_str(), i))
        .collect();
    let mut graph = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..reactors.len()).map(|i| graph.add_node(i)).collect();
    for (i, r) in reactors.iter().enumerate() {
        let mut mentioned = HashSet::new();
        let mut visit = |name: &str, _: &mut FeatureReport| {
            if let Some(&j) = index.get(name) {
                mentioned.insert(j);
            }
        };
        let mut scratch = FeatureReport::default();
        for init in r.trampolines.iter().map(|(_, e)| e) {
            scan_features(init, &mut scratch, &mut visit);
        }
        scan_defs(&r.body_defs, &mut scratch, &mut visit);
        for e in r.sinks.iter().chain(r.trampoline_updates.iter()) {
            scan_features(e, &mut scratch, &mut visit);
        }
        let mut targets: Vec<usize> = mentioned.into_iter().collect();
        targets.sort_unstable();
        for j in targets {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut cycles: Vec<Vec<String>> = Vec::new();
    for scc in petgraph::algo::tarjan_scc(&graph) {
        let cyclic = scc.len() > 1
            || graph
                .find_edge(scc[0], scc[0])
                .is_some();
        if cyclic {
            let mut members: Vec<usize> = scc.iter().map(|n| graph[*n]).collect();
            members.sort_unstable();
            cycles.push(members.into_iter().map(|i| reactors[i].name.clone()).collect());
        }
    }
    cycles.sort();
    cycles
}

/// Every deployment whose operator and first operand are the same
/// identifier. This is the syntactic occurs-check for fixpoint combinators.
pub fn detect_self_application(program: &Program) -> Vec<String> {
    let mut sites = Vec::new();
    for def in &program.definitions {
        match def {
            Definition::Reactor(r) => {
                for init in r.trampolines.iter().map(|(_, e)| e) {
                    scan_self_app(init, &mut sites);
                }
                for d in &r.body_defs {
                    scan_self_app(&d.expr, &mut sites);
                }
                for e in r.sinks.iter().chain(r.trampoline_updates.iter()) {
                    scan_self_app(e, &mut sites);
                }
            }
            Definition::Signal(d) => scan_self_app(&d.expr, &mut sites),
        }
    }
    sites
}

fn scan_self_app(expr: &Expr, sites: &mut Vec<String>) {
    match &expr.kind {
        ExprKind::Deploy { operator, operands } => {
            if let (ExprKind::Var(op), Some(ExprKind::Var(arg))) =
                (&operator.kind, operands.first().map(|a| &a.kind))
            {
                if op == arg {
                    sites.push(expr.span.to_string());
                }
            }
            scan_self_app(operator, sites);
            for a in operands {
                scan_self_app(a, sites);
            }
        }
        ExprKind::If {
            cond,
            consequent,
            alternate,
        } => {
            scan_self_app(cond, sites);
            scan_self_app(consequent, sites);
            scan_self_app(alternate, sites);
        }
        ExprKind::Rho(rho) => {
            for d in &rho.body_defs {
                scan_self_app(&d.expr, sites);
            }
            for s in &rho.sinks {
                scan_self_app(s, sites);
            }
        }
        ExprKind::Var(_) | ExprKind::Literal(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, read_data};

    fn program(text: &str) -> Program {
        parse_program(&read_data("<test>", text).unwrap()).unwrap()
    }

    #[test]
    fn first_order_is_strong() {
        let p = program("(defr (to-c k) (- k 273.15))");
        let c = classify(&p);
        assert_eq!(c.tier, ReactivityTier::Strong);
        assert!(!c.features.uses_trampolines);
    }

    #[test]
    fn stateful_and_conditional_stay_strong() {
        let p = program(
            "(defr (pre2 s init | (acc init)) (out acc | s))
             (defr (step n) (if (even? n) (/ n 2) (+ (* 3 n) 1)))",
        );
        let c = classify(&p);
        assert_eq!(c.tier, ReactivityTier::Strong);
        assert!(c.features.uses_trampolines);
        assert!(c.features.uses_conditionals);
    }

    #[test]
    fn self_recursion_is_weak_with_self_loop() {
        let p = program(
            "(defr (len num count) (if (= num 1) count (len (- num 1) (+ count 1))))",
        );
        let c = classify(&p);
        assert_eq!(c.tier, ReactivityTier::Weak);
        assert_eq!(c.features.recursion_cycles, vec![vec!["len".to_string()]]);
    }

    #[test]
    fn mutual_recursion_is_one_two_member_cycle() {
        let p = program(
            "(defr (ping x) (pong (+ x 1)))
             (defr (pong x) (ping (- x 1)))",
        );
        let cycles = detect_recursion(&p);
        assert_eq!(cycles, vec![vec!["ping".to_string(), "pong".to_string()]]);
        // Soundness: both reactors can transitively deploy themselves.
        for name in ["ping", "pong"] {
            assert!(cycles.iter().any(|c| c.iter().any(|n| n == name)));
        }
    }

    #[test]
    fn self_application_sites_are_counted() {
        let p = program(
            "(defr (fix f) ((rho (x) (f (rho (y) ((x x) y)))) (rho (x) (f (rho (y) ((x x) y))))))",
        );
        assert_eq!(detect_self_application(&p).len(), 2);
        assert_eq!(classify(&p).tier, ReactivityTier::Weak);

        let none = program("(defr (mk f) (rho (a b) (f a b)))");
        assert!(detect_self_application(&none).is_empty());

        let top = program("(def y (f f))");
        assert_eq!(detect_self_application(&top).len(), 1);
    }

    #[test]
    fn slow_string_primitives_make_eventual() {
        let p = program("(defr (greet name) (string-append \"hi \" name))");
        let c = classify(&p);
        assert_eq!(c.tier, ReactivityTier::Eventual);
        assert_eq!(
            c.features.non_constant_time_primitives,
            vec!["string-append".to_string()]
        );
    }

    #[test]
    fn adding_definitions_never_raises_the_tier() {
        let base = "(defr (len n c) (if (= n 1) c (len (- n 1) (+ c 1))))";
        let weak = classify(&program(base)).tier;
        let extended = classify(&program(&format!(
            "{base}\n(defr (to-c k) (- k 273.15))"
        )))
        .tier;
        assert_eq!(weak, ReactivityTier::Weak);
        assert_eq!(extended, ReactivityTier::Weak);
    }
}
