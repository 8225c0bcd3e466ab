//! The reactive engine: deploys reactors into signal graphs and executes
//! glitch-free update turns.
//!
//! Propagation is push-based and height-ordered: every signal's height is
//! strictly greater than the heights of its active dependencies, and the
//! update queue pops nodes in non-decreasing height order, so a node
//! recomputes only after all of its same-turn-updated dependencies have
//! recomputed, and at most once per turn. Structural changes in the middle of
//! a turn (conditional branch toggles, dynamic operator switches, recursive
//! expansion) assign new signals heights above the triggering node and repair
//! downstream heights before enqueueing.

mod graph;
pub mod trace;

pub use graph::{
    Branch, BranchThunk, CondState, DeploymentNode, DynState, Role, SignalKind, SignalNode,
    TrampolineState,
};
pub use trace::{TraceEvent, TraceKind, TurnReport};

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::rc::Rc;
use std::time::Instant;

use crate::env::{free_identifiers, Env};
use crate::syntax::{Expr, ExprKind, Lit, Program, ReactorDef, SignalDef, SourceSpan};
use crate::value::{
    Binding, CaptureData, DeploymentId, IoKind, IoSpec, PrimitiveSpec, ReactorKind, ReactorValue,
    SignalId, Value,
};

/// Default per-turn recursion budget on deployment nesting depth.
pub const DEFAULT_DEPTH_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, thiserror::Error)]
pub enum EngineError {
    #[error("{span}: unbound identifier `{name}`")]
    UnboundIdentifier { name: String, span: SourceSpan },
    #[error("arity mismatch deploying `{reactor}`: expected {expected}, got {got}")]
    ArityMismatch {
        reactor: String,
        expected: String,
        got: usize,
    },
    #[error("operator value is not a reactor: {got}")]
    NotAReactor { got: String },
    #[error("recursion depth budget exceeded ({budget} nested deployments)")]
    DepthExceeded { budget: u64 },
    #[error("multi-sink binding mismatch: expected {expected} signals, got {got}")]
    MultiSinkArityMismatch { expected: usize, got: usize },
    #[error("invalid io configuration: {0}")]
    IoConfig(String),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
}

/// Requests for live adapters, collected during deployment and consumed by
/// the io boundary. The engine never talks to the outside world itself.
#[derive(Debug, Clone)]
pub enum PendingSourceKind {
    WsIn { address: String },
    Timer { period_ms: u64 },
    StdinLines,
    Manual { name: String },
}

#[derive(Debug, Clone)]
pub struct PendingSource {
    pub kind: PendingSourceKind,
    pub signal: SignalId,
}

#[derive(Debug, Clone)]
pub struct PendingSink {
    pub address: String,
    pub signal: SignalId,
}

#[derive(Default)]
struct TurnScratch {
    seeded: Vec<SignalId>,
    recomputed: Vec<SignalId>,
    switches: usize,
    commits: usize,
    deployments_created: usize,
    errors: Vec<String>,
}

pub struct Engine {
    signals: Vec<SignalNode>,
    deployments: Vec<DeploymentNode>,
    table: HashMap<String, ReactorValue>,
    globals: Env,
    sources: HashMap<String, SignalId>,
    pending_sources: Vec<PendingSource>,
    pending_sinks: Vec<PendingSink>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
    turn: u64,
    depth_budget: u64,
    uid_counter: u64,
    scratch: TurnScratch,
    trace: trace::TraceLog,
}

const ROOT: DeploymentId = DeploymentId(0);

impl Engine {
    pub fn new() -> Engine {
        let mut engine = Engine {
            signals: Vec::new(),
            deployments: Vec::new(),
            table: HashMap::new(),
            globals: Env::root(),
            sources: HashMap::new(),
            pending_sources: Vec::new(),
            pending_sinks: Vec::new(),
            heap: BinaryHeap::new(),
            turn: 0,
            depth_budget: DEFAULT_DEPTH_BUDGET,
            uid_counter: 0,
            scratch: TurnScratch::default(),
            trace: trace::TraceLog::default(),
        };
        engine.deployments.push(DeploymentNode {
            id: ROOT,
            parent: None,
            label: "top".to_string(),
            path: String::new(),
            reactor_uid: None,
            explicit_sources: Vec::new(),
            implicit_sources: Vec::new(),
            signals: Vec::new(),
            children: Vec::new(),
            sinks: Vec::new(),
            trampolines: Vec::new(),
            active: true,
            poisoned: false,
            depth: 0,
            reactivated_turn: None,
        });
        engine
    }

    pub fn set_depth_budget(&mut self, budget: u64) {
        self.depth_budget = budget;
    }

    pub fn set_trace_writer(&mut self, writer: Box<dyn std::io::Write + Send>) {
        self.trace.set_writer(writer);
    }

    pub fn flush_trace(&mut self) {
        self.trace.flush();
    }

    fn next_uid(&mut self) -> u64 {
        self.uid_counter += 1;
        self.uid_counter
    }

    // ----- reactor table ---------------------------------------------------

    pub fn register_primitive(&mut self, spec: PrimitiveSpec) {
        let uid = self.next_uid();
        let name = spec.name.to_string();
        self.table.insert(
            name,
            ReactorValue {
                uid,
                kind: ReactorKind::Primitive(Rc::new(spec)),
            },
        );
    }

    pub fn register_io(&mut self, spec: IoSpec) {
        let uid = self.next_uid();
        let name = spec.name.to_string();
        self.table.insert(
            name,
            ReactorValue {
                uid,
                kind: ReactorKind::Io(Rc::new(spec)),
            },
        );
    }

    /// Register (or redefine) a named reactor. Redefinition replaces the
    /// table entry; existing deployments keep the old definition.
    pub fn define_reactor(&mut self, def: Rc<ReactorDef>) -> bool {
        let uid = self.next_uid();
        self.table
            .insert(
                def.name.clone(),
                ReactorValue {
                    uid,
                    kind: ReactorKind::Named(def),
                },
            )
            .is_some()
    }

    pub fn reactor_table(&self) -> &HashMap<String, ReactorValue> {
        &self.table
    }

    pub fn primitive(&self, name: &str) -> Option<Rc<PrimitiveSpec>> {
        match self.table.get(name).map(|r| &r.kind) {
            Some(ReactorKind::Primitive(p)) => Some(p.clone()),
            _ => None,
        }
    }

    // ----- accessors -------------------------------------------------------

    pub fn signal(&self, id: SignalId) -> &SignalNode {
        &self.signals[id.0 as usize]
    }

    pub fn deployment(&self, id: DeploymentId) -> &DeploymentNode {
        &self.deployments[id.0 as usize]
    }

    pub fn deployment_count(&self) -> usize {
        self.deployments.len()
    }

    pub fn trace_events(&self) -> &[TraceEvent] {
        self.trace.events()
    }

    pub fn current_turn(&self) -> u64 {
        self.turn
    }

    pub fn source(&self, name: &str) -> Option<SignalId> {
        self.sources.get(name).copied()
    }

    pub fn global_signal(&self, name: &str) -> Option<SignalId> {
        match self.globals.lookup(name) {
            Some(Binding::Signal(s)) => Some(s),
            _ => None,
        }
    }

    pub fn signal_value(&self, id: SignalId) -> Option<&Value> {
        self.signals[id.0 as usize].current.as_ref()
    }

    pub fn globals_env(&self) -> Env {
        self.globals.clone()
    }

    pub fn drain_pending_sources(&mut self) -> Vec<PendingSource> {
        std::mem::take(&mut self.pending_sources)
    }

    pub fn drain_pending_sinks(&mut self) -> Vec<PendingSink> {
        std::mem::take(&mut self.pending_sinks)
    }

    // ----- program loading -------------------------------------------------

    /// Process a program's definitions in order: `defr` forms extend the
    /// reactor table, `def` forms are deployed immediately, one turn each.
    pub fn load_program(&mut self, program: &Program) -> Vec<TurnReport> {
        let mut reports = Vec::new();
        for def in &program.definitions {
            match def {
                crate::syntax::Definition::Reactor(r) => {
                    self.define_reactor(r.clone());
                }
                crate::syntax::Definition::Signal(d) => {
                    reports.push(self.deploy_global(d));
                }
            }
        }
        reports
    }

    /// Deploy one top-level signal definition in a fresh turn.
    pub fn deploy_global(&mut self, def: &SignalDef) -> TurnReport {
        let start = Instant::now();
        let trace_start = self.begin_turn();
        let mark = self.deployments.len();
        let env = self.globals.clone();
        match self.eval_def(def, &env, ROOT, 0) {
            Ok(sigs) => {
                for (target, sig) in def.targets.iter().zip(sigs.iter()) {
                    self.bind_global(target, *sig);
                }
            }
            Err(e) => {
                self.poison_deployments_from(mark);
                self.record_error(&e.to_string(), def.span.line);
            }
        }
        self.drain_queue();
        self.commit_trampolines();
        self.seal_turn(start, trace_start)
    }

    fn bind_global(&mut self, name: &str, sig: SignalId) {
        self.globals.define(name, Binding::Signal(sig));
        let node = &mut self.signals[sig.0 as usize];
        if node.name.is_empty() || node.kind == SignalKind::Source {
            node.name = name.to_string();
        }
        if matches!(node.role, Role::Source) {
            self.sources.entry(name.to_string()).or_insert(sig);
        }
    }

    /// Run one update turn for a batch of simultaneous external events.
    pub fn run_turn(&mut self, batch: &[(SignalId, Value)]) -> TurnReport {
        let start = Instant::now();
        let trace_start = self.begin_turn();
        for (sig, value) in batch {
            debug_assert!(matches!(self.signals[sig.0 as usize].role, Role::Source));
            self.scratch.seeded.push(*sig);
            self.emit(*sig, value.clone());
        }
        self.drain_queue();
        self.commit_trampolines();
        self.seal_turn(start, trace_start)
    }

    /// Run a turn seeding sources by their registered names.
    pub fn run_turn_named(&mut self, batch: &[(&str, Value)]) -> Result<TurnReport, EngineError> {
        let mut resolved = Vec::with_capacity(batch.len());
        for (name, value) in batch {
            let sig = self
                .source(name)
                .ok_or_else(|| EngineError::UnknownSource(name.to_string()))?;
            resolved.push((sig, value.clone()));
        }
        Ok(self.run_turn(&resolved))
    }

    // ----- turn mechanics --------------------------------------------------

    fn begin_turn(&mut self) -> usize {
        self.scratch = TurnScratch::default();
        self.heap.clear();
        self.trace.len()
    }

    fn seal_turn(&mut self, start: Instant, trace_start: usize) -> TurnReport {
        let scratch = std::mem::take(&mut self.scratch);
        let report = TurnReport {
            turn: self.turn,
            seeded: scratch.seeded,
            recomputed: scratch.recomputed,
            switches: scratch.switches,
            commits: scratch.commits,
            deployments_created: scratch.deployments_created,
            errors: scratch.errors,
            elapsed: start.elapsed(),
            trace_range: (trace_start, self.trace.len()),
        };
        self.turn += 1;
        report
    }

    fn drain_queue(&mut self) {
        while let Some(Reverse((height, raw))) = self.heap.pop() {
            let id = SignalId(raw);
            let node = &self.signals[raw as usize];
            if height != node.height
                || node.recomputed_turn == Some(self.turn)
                || node.enqueued_turn != Some(self.turn)
            {
                continue;
            }
            if !self.effectively_active(node.owner) {
                continue;
            }
            self.recompute(id);
        }
    }

    fn effectively_active(&self, mut dep: DeploymentId) -> bool {
        loop {
            let d = &self.deployments[dep.0 as usize];
            if !d.active || d.poisoned {
                return false;
            }
            match d.parent {
                Some(p) => dep = p,
                None => return true,
            }
        }
    }

    fn maybe_enqueue(&mut self, id: SignalId) {
        let node = &self.signals[id.0 as usize];
        if matches!(node.role, Role::Source | Role::Constant) {
            return;
        }
        if node.enqueued_turn == Some(self.turn) || node.recomputed_turn == Some(self.turn) {
            return;
        }
        if !self.effectively_active(node.owner) {
            return;
        }
        let height = node.height;
        self.signals[id.0 as usize].enqueued_turn = Some(self.turn);
        self.heap.push(Reverse((height, id.0)));
    }

    /// Clear the enqueue mark so a later dependency emission re-enqueues.
    fn defer(&mut self, id: SignalId) {
        self.signals[id.0 as usize].enqueued_turn = None;
    }

    fn emit(&mut self, id: SignalId, value: Value) {
        let turn = self.turn;
        let (is_source, dependents, trace_value, name_path) = {
            let node = &mut self.signals[id.0 as usize];
            node.current = Some(value.clone());
            node.last_emit_turn = Some(turn);
            node.recomputed_turn = Some(turn);
            (
                matches!(node.role, Role::Source),
                node.dependents.clone(),
                value.to_json(),
                self.name_path_of(id),
            )
        };
        if !is_source {
            self.scratch.recomputed.push(id);
        }
        self.trace.push(TraceEvent {
            turn,
            kind: TraceKind::Emit,
            id: id.0,
            name_path,
            value: trace_value,
        });
        for d in dependents {
            self.maybe_enqueue(d);
        }
    }

    fn name_path_of(&self, id: SignalId) -> String {
        let node = &self.signals[id.0 as usize];
        let path = &self.deployments[node.owner.0 as usize].path;
        if path.is_empty() {
            node.name.clone()
        } else {
            format!("{path}{}", node.name)
        }
    }

    fn poison_signal(&mut self, id: SignalId, message: &str) {
        let turn = self.turn;
        let name_path = self.name_path_of(id);
        {
            let node = &mut self.signals[id.0 as usize];
            node.poisoned_turn = Some(turn);
            node.recomputed_turn = Some(turn);
        }
        self.scratch.errors.push(message.to_string());
        self.trace.push(TraceEvent {
            turn,
            kind: TraceKind::Error,
            id: id.0,
            name_path,
            value: serde_json::Value::from(message),
        });
    }

    fn record_error(&mut self, message: &str, line: u32) {
        let turn = self.turn;
        self.scratch.errors.push(message.to_string());
        self.trace.push(TraceEvent {
            turn,
            kind: TraceKind::Error,
            id: u32::MAX,
            name_path: format!("line {line}"),
            value: serde_json::Value::from(message),
        });
    }

    fn poison_deployments_from(&mut self, mark: usize) {
        for d in &mut self.deployments[mark..] {
            d.poisoned = true;
        }
    }

    fn raise_height(&mut self, id: SignalId, min: u64) {
        if self.signals[id.0 as usize].height >= min {
            return;
        }
        let (dependents, enqueued) = {
            let node = &mut self.signals[id.0 as usize];
            node.height = min;
            (
                node.dependents.clone(),
                node.enqueued_turn == Some(self.turn) && node.recomputed_turn != Some(self.turn),
            )
        };
        if enqueued {
            self.heap.push(Reverse((min, id.0)));
        }
        for d in dependents {
            self.raise_height(d, min + 1);
        }
    }

    fn dependencies_of(&self, id: SignalId) -> Vec<SignalId> {
        match &self.signals[id.0 as usize].role {
            Role::Source | Role::Constant | Role::Detached => Vec::new(),
            Role::Apply { deps, .. } => deps.clone(),
            Role::TrampRead { deployment, .. } => {
                let d = &self.deployments[deployment.0 as usize];
                let mut out: Vec<SignalId> = d
                    .trampolines
                    .iter()
                    .filter(|t| {
                        t.read_sig == id
                    })
                    .map(|t| t.init_sig)
                    .collect();
                out.extend(d.explicit_sources.iter().copied());
                out.extend(d.implicit_sources.iter().copied());
                out
            }
            Role::CondCtrl(state) => vec![state.cond],
            Role::CondOut { ctrl } => {
                let mut out = vec![*ctrl];
                if let Role::CondCtrl(state) = &self.signals[ctrl.0 as usize].role {
                    if let Some(active) = state.active {
                        if let Some(b) = &state.branches[active as usize] {
                            out.push(b.out);
                        }
                    }
                }
                out
            }
            Role::DynCtrl(state) => vec![state.operator],
            Role::DynOut { ctrl, idx } => {
                let mut out = vec![*ctrl];
                if let Role::DynCtrl(state) = &self.signals[ctrl.0 as usize].role {
                    if let Some(active) = state.active {
                        let dep = state.cache[active].1;
                        if let Some(sink) = self.deployments[dep.0 as usize].sinks.get(*idx) {
                            out.push(*sink);
                        }
                    }
                }
                out
            }
        }
    }

    // ----- recomputation ---------------------------------------------------

    fn dep_ready(&self, id: SignalId) -> Option<bool> {
        let node = &self.signals[id.0 as usize];
        if node.poisoned_turn == Some(self.turn) {
            None
        } else {
            Some(node.is_valued())
        }
    }

    fn recompute(&mut self, id: SignalId) {
        enum Kind {
            Apply,
            Tramp,
            CondCtrl,
            CondOut,
            DynCtrl,
            DynOut,
            Inert,
        }
        let kind = match &self.signals[id.0 as usize].role {
            Role::Apply { .. } => Kind::Apply,
            Role::TrampRead { .. } => Kind::Tramp,
            Role::CondCtrl(_) => Kind::CondCtrl,
            Role::CondOut { .. } => Kind::CondOut,
            Role::DynCtrl(_) => Kind::DynCtrl,
            Role::DynOut { .. } => Kind::DynOut,
            _ => Kind::Inert,
        };
        match kind {
            Kind::Apply => self.recompute_apply(id),
            Kind::Tramp => self.recompute_tramp(id),
            Kind::CondCtrl => self.recompute_cond_ctrl(id),
            Kind::CondOut => self.recompute_cond_out(id),
            Kind::DynCtrl => self.recompute_dyn_ctrl(id),
            Kind::DynOut => self.recompute_dyn_out(id),
            Kind::Inert => {}
        }
    }

    fn recompute_apply(&mut self, id: SignalId) {
        let (prim, deps) = match &self.signals[id.0 as usize].role {
            Role::Apply { prim, deps } => (prim.clone(), deps.clone()),
            _ => unreachable!(),
        };
        let mut values = Vec::with_capacity(deps.len());
        for d in &deps {
            match self.dep_ready(*d) {
                None | Some(false) => {
                    self.defer(id);
                    return;
                }
                Some(true) => {
                    values.push(self.signals[d.0 as usize].current.clone().unwrap());
                }
            }
        }
        match (prim.apply)(&values) {
            Ok(v) => self.emit(id, v),
            Err(e) => {
                let msg = format!("primitive `{}`: {e}", prim.name);
                self.poison_signal(id, &msg);
            }
        }
    }

    fn recompute_tramp(&mut self, id: SignalId) {
        let (dep_id, idx) = match &self.signals[id.0 as usize].role {
            Role::TrampRead { deployment, idx } => (*deployment, *idx),
            _ => unreachable!(),
        };
        let turn = self.turn;
        let init_sig = self.deployments[dep_id.0 as usize].trampolines[idx].init_sig;
        if !self.deployments[dep_id.0 as usize].trampolines[idx].initialized {
            match self.dep_ready(init_sig) {
                Some(true) => {
                    let v = self.signals[init_sig.0 as usize].current.clone();
                    let t = &mut self.deployments[dep_id.0 as usize].trampolines[idx];
                    t.current = v.clone();
                    t.initialized = true;
                    // The at-deployment value is visible to same-turn readers
                    // without counting as a propagation of its own.
                    self.signals[id.0 as usize].current = v;
                }
                _ => {
                    self.defer(id);
                    return;
                }
            }
        }
        let d = &self.deployments[dep_id.0 as usize];
        // The init signal never counts as a trigger, otherwise deployment
        // itself would propagate the initial value downstream.
        let triggered = d.reactivated_turn == Some(turn)
            || d.explicit_sources
                .iter()
                .chain(d.implicit_sources.iter())
                .any(|s| *s != init_sig && self.signals[s.0 as usize].last_emit_turn == Some(turn));
        if triggered {
            let v = self.deployments[dep_id.0 as usize].trampolines[idx]
                .current
                .clone()
                .expect("initialized trampoline has a value");
            self.emit(id, v);
        } else {
            self.defer(id);
        }
    }

    fn recompute_cond_ctrl(&mut self, id: SignalId) {
        let mut state = match std::mem::replace(&mut self.signals[id.0 as usize].role, Role::Detached)
        {
            Role::CondCtrl(s) => s,
            _ => unreachable!(),
        };
        self.step_cond_ctrl(id, &mut state);
        self.signals[id.0 as usize].role = Role::CondCtrl(state);
    }

    fn step_cond_ctrl(&mut self, id: SignalId, state: &mut CondState) {
        let truth = match self.dep_ready(state.cond) {
            Some(true) => self.signals[state.cond.0 as usize]
                .current
                .as_ref()
                .unwrap()
                .is_truthy(),
            _ => {
                self.defer(id);
                return;
            }
        };
        if state.active == Some(truth) {
            self.signals[id.0 as usize].recomputed_turn = Some(self.turn);
            return;
        }
        // Deactivate the other branch's subgraph, if it has one, before any
        // of its internal nodes get a chance to run this turn.
        if let Some(old) = state.active {
            if let Some(Branch { group: Some(g), .. }) = &state.branches[old as usize] {
                self.deployments[g.0 as usize].active = false;
            }
        }
        let branch_idx = truth as usize;
        let trigger_height = self.signals[id.0 as usize].height;
        let created = if state.branches[branch_idx].is_none() {
            let mark = self.deployments.len();
            let owner = self.signals[id.0 as usize].owner;
            match self.expand_branch(&state.thunks[branch_idx], owner, trigger_height) {
                Ok(branch) => {
                    self.signals[branch.out.0 as usize].dependents.push(state.out);
                    state.branches[branch_idx] = Some(branch);
                    true
                }
                Err(e) => {
                    self.poison_deployments_from(mark);
                    self.poison_signal(id, &e.to_string());
                    state.active = None;
                    return;
                }
            }
        } else {
            if let Some(Branch { group: Some(g), .. }) = &state.branches[branch_idx] {
                self.reactivate(*g, trigger_height + 1);
            }
            false
        };
        state.active = Some(truth);
        state.switched_turn = Some(self.turn);
        self.scratch.switches += 1;
        self.signals[id.0 as usize].recomputed_turn = Some(self.turn);
        let name_path = self.name_path_of(id);
        self.trace.push(TraceEvent {
            turn: self.turn,
            kind: TraceKind::Switch,
            id: id.0,
            name_path,
            value: serde_json::json!({ "branch": truth, "created": created }),
        });
        // The out node settles only after the now-active branch has.
        let branch_out = state.branches[branch_idx].as_ref().unwrap().out;
        let branch_height = self.signals[branch_out.0 as usize].height;
        self.raise_height(state.out, branch_height + 1);
        self.maybe_enqueue(state.out);
    }

    fn recompute_cond_out(&mut self, id: SignalId) {
        let ctrl = match &self.signals[id.0 as usize].role {
            Role::CondOut { ctrl } => *ctrl,
            _ => unreachable!(),
        };
        let branch_out = match &self.signals[ctrl.0 as usize].role {
            Role::CondCtrl(state) => state
                .active
                .and_then(|t| state.branches[t as usize].as_ref())
                .map(|b| b.out),
            _ => None,
        };
        let Some(branch_out) = branch_out else {
            self.defer(id);
            return;
        };
        match self.dep_ready(branch_out) {
            Some(true) => {
                let v = self.signals[branch_out.0 as usize].current.clone().unwrap();
                self.emit(id, v);
            }
            _ => self.defer(id),
        }
    }

    fn expand_branch(
        &mut self,
        thunk: &BranchThunk,
        owner: DeploymentId,
        trigger_height: u64,
    ) -> Result<Branch, EngineError> {
        // A bare named signal is not boxed: it exists and updates
        // independently of the conditional.
        if let ExprKind::Var(name) = &thunk.expr.kind {
            if let Ok(Binding::Signal(s)) = self.resolve(&thunk.env, name, &thunk.expr.span) {
                return Ok(Branch {
                    out: s,
                    group: None,
                });
            }
        }
        let group = self.create_deployment(owner, "branch", None)?;
        let sinks = self.eval_expr(&thunk.expr, &thunk.env, group, trigger_height + 1, 1)?;
        Ok(Branch {
            out: sinks[0],
            group: Some(group),
        })
    }

    fn recompute_dyn_ctrl(&mut self, id: SignalId) {
        let mut state = match std::mem::replace(&mut self.signals[id.0 as usize].role, Role::Detached)
        {
            Role::DynCtrl(s) => s,
            _ => unreachable!(),
        };
        self.step_dyn_ctrl(id, &mut state);
        self.signals[id.0 as usize].role = Role::DynCtrl(state);
    }

    fn step_dyn_ctrl(&mut self, id: SignalId, state: &mut DynState) {
        let reactor = match self.dep_ready(state.operator) {
            Some(true) => match self.signals[state.operator.0 as usize].current.clone() {
                Some(Value::Reactor(rv)) => rv,
                Some(other) => {
                    self.poison_signal(
                        id,
                        &EngineError::NotAReactor {
                            got: other.to_string(),
                        }
                        .to_string(),
                    );
                    return;
                }
                None => unreachable!(),
            },
            _ => {
                self.defer(id);
                return;
            }
        };
        let already = state
            .active
            .map(|i| state.cache[i].0 == reactor.uid)
            .unwrap_or(false);
        if already {
            self.signals[id.0 as usize].recomputed_turn = Some(self.turn);
            return;
        }
        if let Some(i) = state.active {
            let old = state.cache[i].1;
            self.deployments[old.0 as usize].active = false;
        }
        let trigger_height = self.signals[id.0 as usize].height;
        let owner = self.signals[id.0 as usize].owner;
        let (slot, created) = match state.cache.iter().position(|(uid, _)| *uid == reactor.uid) {
            Some(i) => {
                let dep = state.cache[i].1;
                self.deployments[dep.0 as usize].active = true;
                self.reactivate(dep, trigger_height + 1);
                (i, false)
            }
            None => {
                let mark = self.deployments.len();
                match self.deploy_reactor(&reactor, &state.operands, owner, trigger_height + 1) {
                    Ok(dep) => {
                        let n_sinks = self.deployments[dep.0 as usize].sinks.len();
                        if n_sinks != state.outs.len() {
                            self.poison_deployments_from(mark);
                            self.poison_signal(
                                id,
                                &EngineError::MultiSinkArityMismatch {
                                    expected: state.outs.len(),
                                    got: n_sinks,
                                }
                                .to_string(),
                            );
                            return;
                        }
                        state.cache.push((reactor.uid, dep));
                        (state.cache.len() - 1, true)
                    }
                    Err(e) => {
                        self.poison_deployments_from(mark);
                        self.poison_signal(id, &e.to_string());
                        return;
                    }
                }
            }
        };
        state.active = Some(slot);
        let dep = state.cache[slot].1;
        let sinks = self.deployments[dep.0 as usize].sinks.clone();
        for (i, out) in state.outs.clone().into_iter().enumerate() {
            let sink = sinks[i];
            if !self.signals[sink.0 as usize].dependents.contains(&out) {
                self.signals[sink.0 as usize].dependents.push(out);
            }
            let sink_height = self.signals[sink.0 as usize].height;
            self.raise_height(out, sink_height + 1);
            self.maybe_enqueue(out);
        }
        self.scratch.switches += 1;
        self.signals[id.0 as usize].recomputed_turn = Some(self.turn);
        let name_path = self.name_path_of(id);
        self.trace.push(TraceEvent {
            turn: self.turn,
            kind: TraceKind::Switch,
            id: id.0,
            name_path,
            value: serde_json::json!({ "reactor": reactor.name(), "created": created }),
        });
    }

    fn recompute_dyn_out(&mut self, id: SignalId) {
        let (ctrl, idx) = match &self.signals[id.0 as usize].role {
            Role::DynOut { ctrl, idx } => (*ctrl, *idx),
            _ => unreachable!(),
        };
        let sink = match &self.signals[ctrl.0 as usize].role {
            Role::DynCtrl(state) => state.active.map(|i| {
                let dep = state.cache[i].1;
                self.deployments[dep.0 as usize].sinks[idx]
            }),
            _ => None,
        };
        let Some(sink) = sink else {
            self.defer(id);
            return;
        };
        match self.dep_ready(sink) {
            Some(true) => {
                let v = self.signals[sink.0 as usize].current.clone().unwrap();
                self.emit(id, v);
            }
            _ => self.defer(id),
        }
    }

    // ----- activation and reactivation ------------------------------------

    fn subtree_deployments(&self, root: DeploymentId) -> Vec<DeploymentId> {
        let mut out = vec![root];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.deployments[out[i].0 as usize].children.iter().copied());
            i += 1;
        }
        out
    }

    /// Reactivate a cached deployment: repair heights above the trigger and
    /// schedule a full recomputation of its subtree from current values.
    fn reactivate(&mut self, root: DeploymentId, floor: u64) {
        let turn = self.turn;
        self.deployments[root.0 as usize].active = true;
        let subtree = self.subtree_deployments(root);
        let mut sigs: Vec<SignalId> = Vec::new();
        for d in &subtree {
            self.deployments[d.0 as usize].reactivated_turn = Some(turn);
            sigs.extend(self.deployments[d.0 as usize].signals.iter().copied());
        }
        // Heights were valid at creation; repair in ascending old-height
        // order so dependencies are processed before their dependents.
        sigs.sort_by_key(|s| (self.signals[s.0 as usize].height, *s));
        for s in &sigs {
            let deps = self.dependencies_of(*s);
            let mut h = floor.max(self.signals[s.0 as usize].height);
            for d in &deps {
                h = h.max(self.signals[d.0 as usize].height + 1);
            }
            self.signals[s.0 as usize].height = h;
            let dependents = self.signals[s.0 as usize].dependents.clone();
            for dep in dependents {
                self.raise_height(dep, h + 1);
            }
        }
        for s in sigs {
            self.maybe_enqueue(s);
        }
    }

    // ----- deployment ------------------------------------------------------

    fn create_deployment(
        &mut self,
        parent: DeploymentId,
        label: &str,
        reactor_uid: Option<u64>,
    ) -> Result<DeploymentId, EngineError> {
        let depth = self.deployments[parent.0 as usize].depth + 1;
        if depth > self.depth_budget {
            return Err(EngineError::DepthExceeded {
                budget: self.depth_budget,
            });
        }
        let id = DeploymentId(self.deployments.len() as u32);
        let path = format!("{}{}#{}/", self.deployments[parent.0 as usize].path, label, id.0);
        self.deployments.push(DeploymentNode {
            id,
            parent: Some(parent),
            label: label.to_string(),
            path,
            reactor_uid,
            explicit_sources: Vec::new(),
            implicit_sources: Vec::new(),
            signals: Vec::new(),
            children: Vec::new(),
            sinks: Vec::new(),
            trampolines: Vec::new(),
            active: true,
            poisoned: false,
            depth,
            reactivated_turn: None,
        });
        self.deployments[parent.0 as usize].children.push(id);
        self.scratch.deployments_created += 1;
        Ok(id)
    }

    fn add_signal(
        &mut self,
        name: &str,
        kind: SignalKind,
        role: Role,
        deps: &[SignalId],
        owner: DeploymentId,
        floor: u64,
    ) -> SignalId {
        let mut height = floor;
        for d in deps {
            height = height.max(self.signals[d.0 as usize].height + 1);
        }
        let id = SignalId(self.signals.len() as u32);
        self.signals.push(SignalNode {
            id,
            name: name.to_string(),
            kind,
            role,
            height,
            current: None,
            dependents: Vec::new(),
            owner,
            last_emit_turn: None,
            enqueued_turn: None,
            recomputed_turn: None,
            poisoned_turn: None,
        });
        for d in deps {
            self.signals[d.0 as usize].dependents.push(id);
        }
        self.deployments[owner.0 as usize].signals.push(id);
        self.maybe_enqueue(id);
        id
    }

    fn make_constant(&mut self, name: &str, value: Value, owner: DeploymentId, floor: u64) -> SignalId {
        let id = self.add_signal(name, SignalKind::Constant, Role::Constant, &[], owner, floor);
        self.emit(id, value);
        id
    }

    fn resolve(
        &self,
        env: &Env,
        name: &str,
        span: &SourceSpan,
    ) -> Result<Binding, EngineError> {
        if let Some(b) = env.lookup(name) {
            return Ok(b);
        }
        if let Some(rv) = self.table.get(name) {
            return Ok(Binding::Reactor(rv.clone()));
        }
        Err(EngineError::UnboundIdentifier {
            name: name.to_string(),
            span: span.clone(),
        })
    }

    /// Create a capture value: the run-time representation of a rho together
    /// with its lexically captured signals and reactors.
    pub fn make_capture(
        &mut self,
        rho: &Rc<crate::syntax::RhoBody>,
        env: &Env,
    ) -> Result<Value, EngineError> {
        let mut captured = Vec::new();
        for name in free_identifiers(rho) {
            let binding = self.resolve(env, &name, &rho.span)?;
            captured.push((name, binding));
        }
        let uid = self.next_uid();
        Ok(Value::Reactor(ReactorValue {
            uid,
            kind: ReactorKind::Capture(Rc::new(CaptureData {
                rho: rho.clone(),
                captured,
            })),
        }))
    }

    fn eval_def(
        &mut self,
        def: &SignalDef,
        env: &Env,
        owner: DeploymentId,
        floor: u64,
    ) -> Result<Vec<SignalId>, EngineError> {
        let sigs = self.eval_expr(&def.expr, env, owner, floor, def.targets.len())?;
        for (target, sig) in def.targets.iter().zip(sigs.iter()) {
            env.define(target, Binding::Signal(*sig));
            let node = &mut self.signals[sig.0 as usize];
            if node.name.is_empty() {
                node.name = target.clone();
            }
        }
        Ok(sigs)
    }

    /// Evaluate an expression to `want` signals.
    fn eval_expr(
        &mut self,
        expr: &Expr,
        env: &Env,
        owner: DeploymentId,
        floor: u64,
        want: usize,
    ) -> Result<Vec<SignalId>, EngineError> {
        let sigs = match &expr.kind {
            ExprKind::Var(name) => match self.resolve(env, name, &expr.span)? {
                Binding::Signal(s) => vec![s],
                Binding::Reactor(rv) => {
                    let name = rv.name();
                    vec![self.make_constant(&name, Value::Reactor(rv), owner, floor)]
                }
            },
            ExprKind::Literal(lit) => {
                let (name, value) = match lit {
                    Lit::Int(i) => (format!("{i}"), Value::Int(*i)),
                    Lit::Float(f) => (format!("{f:?}"), Value::Float(*f)),
                    Lit::Bool(b) => (if *b { "#t" } else { "#f" }.to_string(), Value::Bool(*b)),
                    Lit::Str(s) => (format!("{s:?}"), Value::string(s)),
                };
                vec![self.make_constant(&name, value, owner, floor)]
            }
            ExprKind::Rho(rho) => {
                let capture = self.make_capture(rho, env)?;
                let name = match &capture {
                    Value::Reactor(rv) => rv.name(),
                    _ => unreachable!(),
                };
                vec![self.make_constant(&name, capture, owner, floor)]
            }
            ExprKind::If {
                cond,
                consequent,
                alternate,
            } => {
                let cond_sig = self.eval_expr(cond, env, owner, floor, 1)?[0];
                let state = CondState {
                    cond: cond_sig,
                    thunks: [
                        BranchThunk {
                            expr: (**alternate).clone(),
                            env: env.clone(),
                        },
                        BranchThunk {
                            expr: (**consequent).clone(),
                            env: env.clone(),
                        },
                    ],
                    branches: [None, None],
                    active: None,
                    out: SignalId(0), // patched right below
                    switched_turn: None,
                };
                let ctrl = self.add_signal(
                    "if?",
                    SignalKind::Conditional,
                    Role::CondCtrl(state),
                    &[cond_sig],
                    owner,
                    floor,
                );
                let out = self.add_signal(
                    "if",
                    SignalKind::Conditional,
                    Role::CondOut { ctrl },
                    &[ctrl],
                    owner,
                    floor,
                );
                if let Role::CondCtrl(state) = &mut self.signals[ctrl.0 as usize].role {
                    state.out = out;
                }
                vec![out]
            }
            ExprKind::Deploy { operator, operands } => {
                return self.eval_deploy(expr, operator, operands, env, owner, floor, want);
            }
        };
        if sigs.len() != want {
            return Err(EngineError::MultiSinkArityMismatch {
                expected: want,
                got: sigs.len(),
            });
        }
        Ok(sigs)
    }

    #[allow(clippy::too_many_arguments)]
    fn eval_deploy(
        &mut self,
        expr: &Expr,
        operator: &Expr,
        operands: &[Expr],
        env: &Env,
        owner: DeploymentId,
        floor: u64,
        want: usize,
    ) -> Result<Vec<SignalId>, EngineError> {
        // Statically resolvable operators deploy directly; reactor-valued
        // signals in operator position create a dynamic operator node.
        enum Operator {
            Static(ReactorValue),
            Dynamic(SignalId),
        }
        let op = match &operator.kind {
            ExprKind::Var(name) => match self.resolve(env, name, &operator.span)? {
                Binding::Reactor(rv) => Operator::Static(rv),
                Binding::Signal(s) => Operator::Dynamic(s),
            },
            ExprKind::Rho(rho) => match self.make_capture(rho, env)? {
                Value::Reactor(rv) => Operator::Static(rv),
                _ => unreachable!(),
            },
            ExprKind::Literal(lit) => {
                return Err(EngineError::NotAReactor {
                    got: format!("{lit:?}"),
                })
            }
            _ => Operator::Dynamic(self.eval_expr(operator, env, owner, floor, 1)?[0]),
        };
        let mut args = Vec::with_capacity(operands.len());
        for a in operands {
            args.push(self.eval_expr(a, env, owner, floor, 1)?[0]);
        }
        match op {
            Operator::Static(rv) => {
                let dep = self.deploy_reactor(&rv, &args, owner, floor)?;
                let sinks = self.deployments[dep.0 as usize].sinks.clone();
                if sinks.len() != want {
                    return Err(EngineError::MultiSinkArityMismatch {
                        expected: want,
                        got: sinks.len(),
                    });
                }
                Ok(sinks)
            }
            Operator::Dynamic(op_sig) => {
                let ctrl = self.add_signal(
                    "apply",
                    SignalKind::DynamicOperator,
                    Role::DynCtrl(DynState {
                        operator: op_sig,
                        operands: args.clone(),
                        outs: Vec::new(),
                        cache: Vec::new(),
                        active: None,
                    }),
                    &[op_sig],
                    owner,
                    floor,
                );
                let mut outs = Vec::with_capacity(want);
                for i in 0..want {
                    let out = self.add_signal(
                        "apply.out",
                        SignalKind::DynamicOperator,
                        Role::DynOut { ctrl, idx: i },
                        &[ctrl],
                        owner,
                        floor,
                    );
                    outs.push(out);
                }
                if let Role::DynCtrl(state) = &mut self.signals[ctrl.0 as usize].role {
                    state.outs = outs.clone();
                }
                let _ = expr;
                Ok(outs)
            }
        }
    }

    /// Instantiate a reactor on argument signals.
    pub fn deploy_reactor(
        &mut self,
        reactor: &ReactorValue,
        args: &[SignalId],
        parent: DeploymentId,
        floor: u64,
    ) -> Result<DeploymentId, EngineError> {
        match &reactor.kind {
            ReactorKind::Primitive(p) => {
                if !p.accepts_arity(args.len()) {
                    return Err(EngineError::ArityMismatch {
                        reactor: p.name.to_string(),
                        expected: match p.max_arity {
                            Some(max) if max == p.min_arity => format!("{}", p.min_arity),
                            Some(max) => format!("{}..{max}", p.min_arity),
                            None => format!("{}+", p.min_arity),
                        },
                        got: args.len(),
                    });
                }
                let dep = self.create_deployment(parent, p.name, Some(reactor.uid))?;
                let sink = self.add_signal(
                    p.name,
                    SignalKind::Sink,
                    Role::Apply {
                        prim: p.clone(),
                        deps: args.to_vec(),
                    },
                    args,
                    dep,
                    floor,
                );
                let d = &mut self.deployments[dep.0 as usize];
                d.explicit_sources = args.to_vec();
                d.sinks = vec![sink];
                Ok(dep)
            }
            ReactorKind::Io(io) => self.deploy_io(io, reactor.uid, args, parent, floor),
            ReactorKind::Named(rdef) => {
                if args.len() != rdef.params.len() {
                    return Err(EngineError::ArityMismatch {
                        reactor: rdef.name.clone(),
                        expected: format!("{}", rdef.params.len()),
                        got: args.len(),
                    });
                }
                let dep = self.create_deployment(parent, &rdef.name, Some(reactor.uid))?;
                self.deployments[dep.0 as usize].explicit_sources = args.to_vec();
                // Named reactor bodies are closed over the reactor table:
                // only params, trampolines, and internal defs are in scope.
                let env = Env::root();
                for (p, a) in rdef.params.iter().zip(args.iter()) {
                    env.define(p, Binding::Signal(*a));
                }
                let rdef = rdef.clone();
                self.deploy_body(
                    dep,
                    &env,
                    &rdef.trampolines,
                    &rdef.body_defs,
                    &rdef.sinks,
                    &rdef.trampoline_updates,
                    floor,
                )?;
                Ok(dep)
            }
            ReactorKind::Capture(cap) => {
                if args.len() != cap.rho.params.len() {
                    return Err(EngineError::ArityMismatch {
                        reactor: reactor.name(),
                        expected: format!("{}", cap.rho.params.len()),
                        got: args.len(),
                    });
                }
                let dep = self.create_deployment(parent, &reactor.name(), Some(reactor.uid))?;
                self.deployments[dep.0 as usize].explicit_sources = args.to_vec();
                self.deployments[dep.0 as usize].implicit_sources = cap.implicit_sources();
                let outer = Env::root();
                for (name, binding) in &cap.captured {
                    outer.define(name, binding.clone());
                }
                let env = outer.child();
                for (p, a) in cap.rho.params.iter().zip(args.iter()) {
                    env.define(p, Binding::Signal(*a));
                }
                let cap = cap.clone();
                self.deploy_body(dep, &env, &[], &cap.rho.body_defs, &cap.rho.sinks, &[], floor)?;
                Ok(dep)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn deploy_body(
        &mut self,
        dep: DeploymentId,
        env: &Env,
        trampolines: &[(String, Expr)],
        body_defs: &[SignalDef],
        sinks: &[Expr],
        updates: &[Expr],
        floor: u64,
    ) -> Result<(), EngineError> {
        let explicit = self.deployments[dep.0 as usize].explicit_sources.clone();
        let implicit = self.deployments[dep.0 as usize].implicit_sources.clone();
        for (idx, (tname, init_expr)) in trampolines.iter().enumerate() {
            let init_sig = self.eval_expr(init_expr, env, dep, floor, 1)?[0];
            let mut deps = vec![init_sig];
            deps.extend(explicit.iter().copied());
            deps.extend(implicit.iter().copied());
            let read_sig = self.add_signal(
                tname,
                SignalKind::Internal,
                Role::TrampRead {
                    deployment: dep,
                    idx,
                },
                &deps,
                dep,
                floor,
            );
            self.deployments[dep.0 as usize].trampolines.push(TrampolineState {
                name: tname.clone(),
                current: None,
                initialized: false,
                init_sig,
                update_sig: None,
                read_sig,
            });
            env.define(tname, Binding::Signal(read_sig));
        }
        for d in body_defs {
            self.eval_def(d, env, dep, floor)?;
        }
        let mut sink_sigs = Vec::with_capacity(sinks.len());
        for s in sinks {
            let sig = self.eval_expr(s, env, dep, floor, 1)?[0];
            if self.signals[sig.0 as usize].kind == SignalKind::Internal {
                self.signals[sig.0 as usize].kind = SignalKind::Sink;
            }
            sink_sigs.push(sig);
        }
        self.deployments[dep.0 as usize].sinks = sink_sigs;
        for (idx, u) in updates.iter().enumerate() {
            let sig = self.eval_expr(u, env, dep, floor, 1)?[0];
            self.deployments[dep.0 as usize].trampolines[idx].update_sig = Some(sig);
        }
        Ok(())
    }

    fn deploy_io(
        &mut self,
        io: &Rc<IoSpec>,
        uid: u64,
        args: &[SignalId],
        parent: DeploymentId,
        floor: u64,
    ) -> Result<DeploymentId, EngineError> {
        let string_arg = |engine: &Engine, i: usize| -> Result<String, EngineError> {
            match args.get(i).and_then(|s| engine.signals[s.0 as usize].current.clone()) {
                Some(Value::Str(s)) => Ok(s.to_string()),
                other => Err(EngineError::IoConfig(format!(
                    "`{}` expects a string literal argument, got {:?}",
                    io.name, other
                ))),
            }
        };
        let dep = self.create_deployment(parent, io.name, Some(uid))?;
        match io.kind {
            IoKind::ManualIn => {
                if args.len() != 1 {
                    return Err(EngineError::ArityMismatch {
                        reactor: io.name.to_string(),
                        expected: "1".to_string(),
                        got: args.len(),
                    });
                }
                let name = string_arg(self, 0)?;
                let sig =
                    self.add_signal(&name, SignalKind::Source, Role::Source, &[], dep, floor);
                self.sources.insert(name.clone(), sig);
                self.pending_sources.push(PendingSource {
                    kind: PendingSourceKind::Manual { name },
                    signal: sig,
                });
                self.deployments[dep.0 as usize].sinks = vec![sig];
            }
            IoKind::WsIn => {
                let address = string_arg(self, 0)?;
                let sig =
                    self.add_signal(&address, SignalKind::Source, Role::Source, &[], dep, floor);
                self.pending_sources.push(PendingSource {
                    kind: PendingSourceKind::WsIn { address },
                    signal: sig,
                });
                self.deployments[dep.0 as usize].sinks = vec![sig];
            }
            IoKind::Timer => {
                let period = match args
                    .first()
                    .and_then(|s| self.signals[s.0 as usize].current.clone())
                {
                    Some(Value::Int(ms)) if ms > 0 => ms as u64,
                    other => {
                        return Err(EngineError::IoConfig(format!(
                            "`timer` expects a positive integer period, got {other:?}"
                        )))
                    }
                };
                let sig =
                    self.add_signal("timer", SignalKind::Source, Role::Source, &[], dep, floor);
                self.pending_sources.push(PendingSource {
                    kind: PendingSourceKind::Timer { period_ms: period },
                    signal: sig,
                });
                self.deployments[dep.0 as usize].sinks = vec![sig];
            }
            IoKind::StdinLines => {
                let sig =
                    self.add_signal("stdin", SignalKind::Source, Role::Source, &[], dep, floor);
                self.pending_sources.push(PendingSource {
                    kind: PendingSourceKind::StdinLines,
                    signal: sig,
                });
                self.deployments[dep.0 as usize].sinks = vec![sig];
            }
            IoKind::WsOut => {
                if args.len() != 2 {
                    return Err(EngineError::ArityMismatch {
                        reactor: io.name.to_string(),
                        expected: "2".to_string(),
                        got: args.len(),
                    });
                }
                let address = string_arg(self, 0)?;
                let input = args[1];
                self.pending_sinks.push(PendingSink {
                    address,
                    signal: input,
                });
                // Pass-through: the def binds to the consumed signal.
                self.deployments[dep.0 as usize].sinks = vec![input];
            }
        }
        Ok(dep)
    }

    // ----- trampoline commits ---------------------------------------------

    /// End-of-turn commit: for every active deployment whose trampoline
    /// update signal was recomputed this turn, store the new value. Commits
    /// do not schedule any propagation.
    fn commit_trampolines(&mut self) {
        let turn = self.turn;
        let mut pending: Vec<(DeploymentId, usize, Value, SignalId)> = Vec::new();
        for d in 0..self.deployments.len() {
            let dep_id = DeploymentId(d as u32);
            if self.deployments[d].trampolines.is_empty() || !self.effectively_active(dep_id) {
                continue;
            }
            for (idx, t) in self.deployments[d].trampolines.iter().enumerate() {
                let Some(u) = t.update_sig else { continue };
                let u_node = &self.signals[u.0 as usize];
                if u_node.last_emit_turn == Some(turn)
                    && u_node.poisoned_turn != Some(turn)
                    && u_node.is_valued()
                {
                    pending.push((
                        dep_id,
                        idx,
                        u_node.current.clone().unwrap(),
                        t.read_sig,
                    ));
                }
            }
        }
        for (dep, idx, value, read_sig) in pending {
            {
                let t = &mut self.deployments[dep.0 as usize].trampolines[idx];
                t.current = Some(value.clone());
                t.initialized = true;
            }
            self.signals[read_sig.0 as usize].current = Some(value.clone());
            self.scratch.commits += 1;
            let name_path = self.name_path_of(read_sig);
            self.trace.push(TraceEvent {
                turn,
                kind: TraceKind::Commit,
                id: read_sig.0,
                name_path,
                value: value.to_json(),
            });
        }
    }
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new()
    }
}
