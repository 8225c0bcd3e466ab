//! Signal and deployment node storage.

use std::rc::Rc;

use crate::env::Env;
use crate::syntax::Expr;
use crate::value::{DeploymentId, PrimitiveSpec, SignalId, Value};

/// Role a signal node plays in propagation. The role decides how the node is
/// recomputed when it is popped from the update queue.
#[derive(Debug)]
pub enum Role {
    /// Externally seeded; never recomputed.
    Source,
    /// Valued once at creation; never changes thereafter.
    Constant,
    /// Sink of a primitive deployment: applies a pure transformer to its
    /// dependency values.
    Apply {
        prim: Rc<PrimitiveSpec>,
        deps: Vec<SignalId>,
    },
    /// Reads a trampoline variable: propagates the value committed at the end
    /// of the previous turn whenever the owning deployment updates.
    TrampRead { deployment: DeploymentId, idx: usize },
    /// Hidden controller of a conditional: watches the condition's truth
    /// value and toggles between two branch subgraphs. Sits just above the
    /// condition signal so switching happens before branch internals run.
    CondCtrl(CondState),
    /// Output of a conditional: copies the active branch's sink value.
    CondOut { ctrl: SignalId },
    /// Hidden controller of a dynamic operator node: watches the
    /// reactor-valued operator signal and switches deployments.
    DynCtrl(DynState),
    /// One sink of a dynamic operator node: copies the active deployment's
    /// corresponding sink value.
    DynOut { ctrl: SignalId, idx: usize },
    /// Placeholder while a CondOut/DynCtrl role is temporarily detached
    /// during its own recomputation.
    Detached,
}

#[derive(Debug, Clone)]
pub struct BranchThunk {
    pub expr: Expr,
    pub env: Env,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub out: SignalId,
    /// None when the branch is a bare named signal (no grey box).
    pub group: Option<DeploymentId>,
}

#[derive(Debug)]
pub struct CondState {
    pub cond: SignalId,
    /// Indexed by truth value: [false, true].
    pub thunks: [BranchThunk; 2],
    pub branches: [Option<Branch>; 2],
    pub active: Option<bool>,
    pub out: SignalId,
    /// Turn in which the active branch last changed; the out node emits on a
    /// switch even when the branch output itself did not re-emit.
    pub switched_turn: Option<u64>,
}

#[derive(Debug)]
pub struct DynState {
    pub operator: SignalId,
    pub operands: Vec<SignalId>,
    pub outs: Vec<SignalId>,
    /// Reactor uid -> cached deployment, in first-seen order.
    pub cache: Vec<(u64, DeploymentId)>,
    pub active: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Source,
    Internal,
    Sink,
    Constant,
    Conditional,
    DynamicOperator,
}

#[derive(Debug)]
pub struct SignalNode {
    pub id: SignalId,
    pub name: String,
    pub kind: SignalKind,
    pub role: Role,
    pub height: u64,
    pub current: Option<Value>,
    pub dependents: Vec<SignalId>,
    pub owner: DeploymentId,
    pub last_emit_turn: Option<u64>,
    pub enqueued_turn: Option<u64>,
    pub recomputed_turn: Option<u64>,
    pub poisoned_turn: Option<u64>,
}

impl SignalNode {
    pub fn is_valued(&self) -> bool {
        self.current.is_some()
    }
}

#[derive(Debug)]
pub struct TrampolineState {
    pub name: String,
    pub current: Option<Value>,
    pub initialized: bool,
    pub init_sig: SignalId,
    pub update_sig: Option<SignalId>,
    pub read_sig: SignalId,
}

#[derive(Debug)]
pub struct DeploymentNode {
    pub id: DeploymentId,
    pub parent: Option<DeploymentId>,
    pub label: String,
    pub path: String,
    pub reactor_uid: Option<u64>,
    pub explicit_sources: Vec<SignalId>,
    pub implicit_sources: Vec<SignalId>,
    pub signals: Vec<SignalId>,
    pub children: Vec<DeploymentId>,
    pub sinks: Vec<SignalId>,
    pub trampolines: Vec<TrampolineState>,
    pub active: bool,
    pub poisoned: bool,
    pub depth: u64,
    pub reactivated_turn: Option<u64>,
}
