//! Networks of timed automata with binary channels and bounded data.

pub mod automaton;
pub mod concrete;
pub mod expr;
pub mod model;
pub mod semantics;

pub use automaton::FiniteAutomaton;
pub use expr::{BinOp, CExpr, CmpOp, Expr};
pub use model::{
    instantiate, Assign, ChanDecl, ClockCmp, Declarations, Edge, Instance, InstanceDecl, Location, ModelError, Network, Sync, SyncDir, Template,
    VarDecl,
};
pub use semantics::{initial_state, successors, EdgeLabel, SymState};
