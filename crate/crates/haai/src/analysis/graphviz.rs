//! Reactor graph export as Graphviz DOT.
//!
//! Signals render as ellipses, operators as boxes. Nodes are grouped into
//! source / internal / sink regions plus a trampoline region. Trampoline
//! update edges are dashed: deleting every dashed edge must leave the graph
//! acyclic, which `GraphIr::is_acyclic_without_dashed` checks.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::syntax::{Expr, ExprKind, Lit, Program, ReactorDef, RhoBody, SignalDef};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("unknown reactor `{0}`")]
    UnknownReactor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Source,
    Internal,
    Sink,
    Trampoline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeShape {
    Ellipse,
    Box,
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub id: usize,
    pub label: String,
    pub shape: NodeShape,
    pub region: Region,
    /// Index into `GraphIr::clusters`, if the node sits inside one.
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct GraphCluster {
    pub label: String,
}

/// Intermediate form of an exported reactor graph; `to_dot` renders it.
#[derive(Debug, Default)]
pub struct GraphIr {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub clusters: Vec<GraphCluster>,
}

impl GraphIr {
    pub fn trampoline_nodes(&self) -> Vec<&GraphNode> {
        self.nodes
            .iter()
            .filter(|n| n.region == Region::Trampoline)
            .collect()
    }

    pub fn sink_nodes(&self) -> Vec<&GraphNode> {
        self.nodes.iter().filter(|n| n.region == Region::Sink).collect()
    }

    /// True when the graph without its dashed (delayed) edges has no cycle.
    pub fn is_acyclic_without_dashed(&self) -> bool {
        let mut graph = petgraph::graph::DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..self.nodes.len()).map(|i| graph.add_node(i)).collect();
        for e in self.edges.iter().filter(|e| !e.dashed) {
            graph.add_edge(nodes[e.from], nodes[e.to], ());
        }
        !petgraph::algo::is_cyclic_directed(&graph)
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{name}\" {{");
        let _ = writeln!(out, "  rankdir=TB;");
        for (region, rank) in [
            (Region::Source, "source"),
            (Region::Sink, "sink"),
        ] {
            let ids: Vec<String> = self
                .nodes
                .iter()
                .filter(|n| n.region == region && n.cluster.is_none())
                .map(|n| format!("n{}", n.id))
                .collect();
            if !ids.is_empty() {
                let _ = writeln!(out, "  {{ rank={rank}; {}; }}", ids.join("; "));
            }
        }
        for n in self.nodes.iter().filter(|n| n.cluster.is_none()) {
            let _ = writeln!(out, "  {}", node_line(n));
        }
        for (ci, cluster) in self.clusters.iter().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_{ci} {{");
            let _ = writeln!(out, "    label=\"{}\";", cluster.label);
            let _ = writeln!(out, "    style=filled; color=lightgrey;");
            for n in self.nodes.iter().filter(|n| n.cluster == Some(ci)) {
                let _ = writeln!(out, "    {}", node_line(n));
            }
            let _ = writeln!(out, "  }}");
        }
        for e in &self.edges {
            let style = if e.dashed { " [style=dashed]" } else { "" };
            let _ = writeln!(out, "  n{} -> n{}{style};", e.from, e.to);
        }
        let _ = writeln!(out, "}}");
        out
    }
}

fn node_line(n: &GraphNode) -> String {
    let shape = match n.shape {
        NodeShape::Ellipse => "ellipse",
        NodeShape::Box => "box",
    };
    let extra = if n.region == Region::Trampoline {
        ", peripheries=2, trampoline=true"
    } else {
        ""
    };
    format!(
        "n{} [label=\"{}\", shape={shape}{extra}];",
        n.id,
        n.label.replace('"', "\\\"")
    )
}

/// Build the graph of one named reactor in `program`.
pub fn export_graph(program: &Program, reactor: &str) -> Result<GraphIr, GraphError> {
    let def = program
        .reactor(reactor)
        .ok_or_else(|| GraphError::UnknownReactor(reactor.to_string()))?;
    Ok(build_reactor(def))
}

struct Builder {
    ir: GraphIr,
    cluster: Option<usize>,
}

impl Builder {
    fn add_node(&mut self, label: &str, shape: NodeShape, region: Region) -> usize {
        let id = self.ir.nodes.len();
        self.ir.nodes.push(GraphNode {
            id,
            label: label.to_string(),
            shape,
            region,
            cluster: self.cluster,
        });
        id
    }

    fn add_edge(&mut self, from: usize, to: usize, dashed: bool) {
        self.ir.edges.push(GraphEdge { from, to, dashed });
    }

    fn build_expr(&mut self, expr: &Expr, scope: &HashMap<String, usize>) -> usize {
        match &expr.kind {
            ExprKind::Var(name) => match scope.get(name) {
                Some(&id) => id,
                None => self.add_node(name, NodeShape::Ellipse, Region::Internal),
            },
            ExprKind::Literal(lit) => {
                let label = match lit {
                    Lit::Int(i) => format!("{i}"),
                    Lit::Float(f) => format!("{f:?}"),
                    Lit::Bool(true) => "#t".to_string(),
                    Lit::Bool(false) => "#f".to_string(),
                    Lit::Str(s) => format!("{s:?}"),
                };
                self.add_node(&label, NodeShape::Ellipse, Region::Internal)
            }
            ExprKind::Deploy { operator, operands } => {
                let op_label = match &operator.kind {
                    ExprKind::Var(name) => name.clone(),
                    _ => "apply".to_string(),
                };
                let arg_ids: Vec<usize> =
                    operands.iter().map(|a| self.build_expr(a, scope)).collect();
                let box_id = self.add_node(&op_label, NodeShape::Box, Region::Internal);
                if !matches!(operator.kind, ExprKind::Var(_)) {
                    let op_id = self.build_expr(operator, scope);
                    self.add_edge(op_id, box_id, false);
                }
                for a in arg_ids {
                    self.add_edge(a, box_id, false);
                }
                let out = self.add_node("", NodeShape::Ellipse, Region::Internal);
                self.add_edge(box_id, out, false);
                out
            }
            ExprKind::If {
                cond,
                consequent,
                alternate,
            } => {
                let cond_id = self.build_expr(cond, scope);
                let box_id = self.add_node("if", NodeShape::Box, Region::Internal);
                self.add_edge(cond_id, box_id, false);
                for (branch, label) in [(consequent, "then"), (alternate, "else")] {
                    let saved = self.cluster;
                    self.ir.clusters.push(GraphCluster {
                        label: label.to_string(),
                    });
                    self.cluster = Some(self.ir.clusters.len() - 1);
                    let out = self.build_expr(branch, scope);
                    self.cluster = saved;
                    self.add_edge(out, box_id, false);
                }
                let out = self.add_node("", NodeShape::Ellipse, Region::Internal);
                self.add_edge(box_id, out, false);
                out
            }
            ExprKind::Rho(rho) => {
                let saved = self.cluster;
                self.ir.clusters.push(GraphCluster {
                    label: "rho".to_string(),
                });
                self.cluster = Some(self.ir.clusters.len() - 1);
                self.build_rho_body(rho, scope);
                self.cluster = saved;
                self.add_node("rho", NodeShape::Ellipse, Region::Internal)
            }
        }
    }

    fn build_rho_body(&mut self, rho: &RhoBody, outer: &HashMap<String, usize>) {
        let mut scope = outer.clone();
        for p in &rho.params {
            let id = self.add_node(p, NodeShape::Ellipse, Region::Internal);
            scope.insert(p.clone(), id);
        }
        self.build_defs(&rho.body_defs, &mut scope);
        for s in &rho.sinks {
            self.build_expr(s, &scope);
        }
    }

    fn build_defs(&mut self, defs: &[SignalDef], scope: &mut HashMap<String, usize>) {
        for d in defs {
            let id = self.build_expr(&d.expr, scope);
            if d.targets.len() == 1 {
                if self.ir.nodes[id].label.is_empty() {
                    self.ir.nodes[id].label = d.targets[0].clone();
                }
                scope.insert(d.targets[0].clone(), id);
            } else {
                // Multi-sink deployments fan out through extra ellipses.
                for t in &d.targets {
                    let out = self.add_node(t, NodeShape::Ellipse, Region::Internal);
                    self.add_edge(id, out, false);
                    scope.insert(t.clone(), out);
                }
            }
        }
    }
}

fn build_reactor(def: &ReactorDef) -> GraphIr {
    let mut b = Builder {
        ir: GraphIr::default(),
        cluster: None,
    };
    let mut scope: HashMap<String, usize> = HashMap::new();
    for p in &def.params {
        let id = b.add_node(p, NodeShape::Ellipse, Region::Source);
        scope.insert(p.clone(), id);
    }
    // Trampolines get their node first so body defs can read them; the init
    // edge is solid, the delayed update edge dashed.
    let mut tramp_ids = Vec::new();
    for (name, init) in &def.trampolines {
        let init_id = b.build_expr(init, &scope);
        let t_id = b.add_node(name, NodeShape::Ellipse, Region::Trampoline);
        b.add_edge(init_id, t_id, false);
        scope.insert(name.clone(), t_id);
        tramp_ids.push(t_id);
    }
    b.build_defs(&def.body_defs, &mut scope);
    for sink in &def.sinks {
        let id = b.build_expr(sink, &scope);
        b.ir.nodes[id].region = Region::Sink;
    }
    for (t_id, update) in tramp_ids.iter().zip(def.trampoline_updates.iter()) {
        let u_id = b.build_expr(update, &scope);
        b.add_edge(u_id, *t_id, true);
    }
    b.ir
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, read_data};

    fn program(text: &str) -> Program {
        parse_program(&read_data("<test>", text).unwrap()).unwrap()
    }

    #[test]
    fn unknown_reactor_is_an_error() {
        let p = program("(defr (id x) x)");
        assert!(matches!(
            export_graph(&p, "nope"),
            Err(GraphError::UnknownReactor(_))
        ));
    }

    #[test]
    fn kelvin_conversion_graph_shape() {
        let p = program("(defr (to-c k) (- k 273.15))");
        let ir = export_graph(&p, "to-c").unwrap();
        let sources: Vec<_> = ir
            .nodes
            .iter()
            .filter(|n| n.region == Region::Source)
            .collect();
        assert_eq!(sources.len(), 1);
        assert!(ir.nodes.iter().any(|n| n.label == "273.15"));
        assert_eq!(
            ir.nodes
                .iter()
                .filter(|n| n.shape == NodeShape::Box)
                .count(),
            1
        );
        assert_eq!(ir.sink_nodes().len(), 1);
        assert!(ir.is_acyclic_without_dashed());
    }

    #[test]
    fn two_sink_reactor_has_two_sink_nodes() {
        let p = program("(defr (sum-prod x y) (def s (+ x y)) (def p (* x y)) (out s p))");
        let ir = export_graph(&p, "sum-prod").unwrap();
        assert_eq!(ir.sink_nodes().len(), 2);
    }

    #[test]
    fn trampolines_have_solid_init_and_dashed_update() {
        let p = program(
            "(defr (mm s | (i s) (a s))
               (def mi (smallest s i))
               (def ma (largest s a))
               (out mi ma | mi ma))",
        );
        let ir = export_graph(&p, "mm").unwrap();
        let tramps = ir.trampoline_nodes();
        assert_eq!(tramps.len(), 2);
        for t in &tramps {
            let solid = ir
                .edges
                .iter()
                .filter(|e| e.to == t.id && !e.dashed)
                .count();
            let dashed = ir
                .edges
                .iter()
                .filter(|e| e.to == t.id && e.dashed)
                .count();
            assert_eq!((solid, dashed), (1, 1));
        }
        // With the dashed update edges the graph cycles; without, it cannot.
        assert!(ir.is_acyclic_without_dashed());
        let dot = ir.to_dot("mm");
        assert_eq!(dot.matches("style=dashed").count(), 2);
    }

    #[test]
    fn conditional_branches_become_clusters() {
        let p = program("(defr (step n) (if (even? n) (/ n 2) (+ (* 3 n) 1)))");
        let ir = export_graph(&p, "step").unwrap();
        assert_eq!(ir.clusters.len(), 2);
        let dot = ir.to_dot("step");
        assert!(dot.contains("subgraph cluster_0"));
        assert!(dot.contains("subgraph cluster_1"));
    }
}
