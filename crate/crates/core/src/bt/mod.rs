//! Behaviour-tree data model and tick engine.

mod blackboard;
mod engine;
mod node;
mod trace;

pub use blackboard::{Blackboard, BlackboardError, TimeSeries, Value};
pub use engine::{
    tick_tree, BtError, Context, Executor, Handler, Handlers, Leaf, SimClock, DEFAULT_VISIT_BUDGET,
};
pub use node::{
    ActionSpec, ArgValue, ConditionSpec, DecoratorKind, Node, NodeKind, SourceSpan, Status,
    TreeDef, TreeError,
};
pub use trace::{MemorySink, TickRecord, TraceSink};
