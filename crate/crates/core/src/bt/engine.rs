//! Tick engine.
//!
//! A [`TreeDef`] is compiled into a flat arena with skills inlined at every use
//! site. Composites have memory: a sequence or fallback that returned `Running`
//! resumes at the running child on the next tick. Any node that completes
//! (returns `Success` or `Failure`) clears the state of its whole subtree, so
//! only running branches carry state between ticks.
//!
//! Time is simulated. Actions advance [`SimClock`] by their duration; a
//! parallel node ticks every child from its own entry time and leaves the clock
//! at the latest child exit time.

use std::collections::HashMap;
use std::error::Error as StdError;
use std::io;

use super::blackboard::{Blackboard, BlackboardError};
use super::node::{
    ActionSpec, ConditionSpec, DecoratorKind, Node, NodeKind, Status, TreeDef, TreeError,
};
use super::trace::{TickRecord, TraceSink};

/// Simulated time in seconds. Never moves backwards between ticks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimClock {
    now: f64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(now: f64) -> Self {
        assert!(
            now >= 0.0 && now.is_finite(),
            "clock start must be a non-negative finite time"
        );
        Self { now }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Moves time forward by `dt` seconds. Negative or non-finite deltas are ignored.
    pub fn advance(&mut self, dt: f64) {
        if dt > 0.0 && dt.is_finite() {
            self.now += dt;
        }
    }

    /// Parallel children all start from the parallel node's entry time.
    fn rewind_to(&mut self, t: f64) {
        self.now = t;
    }
}

/// Per-instance execution state shared with handlers.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub blackboard: Blackboard,
    pub clock: SimClock,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BtError {
    #[error("invalid tree: {0}")]
    InvalidTree(#[from] TreeError),
    #[error("no handler registered for {kind} `{name}`")]
    UnknownHandler { kind: &'static str, name: String },
    #[error(transparent)]
    Blackboard(#[from] BlackboardError),
    #[error("condition `{0}` returned running; conditions may only succeed or fail")]
    ConditionRunning(String),
    #[error("tick exceeded the budget of {0} node visits")]
    VisitBudget(usize),
    #[error("`{name}`: {source}")]
    Handler {
        name: String,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
    #[error("trace sink: {0}")]
    Trace(#[from] io::Error),
    #[error("tree still running after {0} ticks")]
    TickLimit(u64),
}

impl BtError {
    pub fn handler(
        name: impl Into<String>,
        source: impl Into<Box<dyn StdError + Send + Sync>>,
    ) -> Self {
        BtError::Handler {
            name: name.into(),
            source: source.into(),
        }
    }
}

/// Binds action and condition names to behaviour.
pub trait Handler {
    fn has_action(&self, name: &str) -> bool;
    fn has_condition(&self, name: &str) -> bool;
    fn action(&mut self, spec: &ActionSpec, ctx: &mut Context) -> Result<Status, BtError>;
    fn condition(&mut self, spec: &ConditionSpec, ctx: &mut Context) -> Result<Status, BtError>;
}

type ActionFn<'a> = Box<dyn FnMut(&ActionSpec, &mut Context) -> Result<Status, BtError> + 'a>;
type ConditionFn<'a> = Box<dyn FnMut(&ConditionSpec, &mut Context) -> Result<Status, BtError> + 'a>;

/// Closure-backed [`Handler`], handy for tests and small embeddings.
#[derive(Default)]
pub struct Handlers<'a> {
    actions: HashMap<String, ActionFn<'a>>,
    conditions: HashMap<String, ConditionFn<'a>>,
}

impl<'a> Handlers<'a> {
    pub fn new() -> Self {
        Self {
            actions: HashMap::new(),
            conditions: HashMap::new(),
        }
    }

    pub fn action(
        mut self,
        name: &str,
        f: impl FnMut(&ActionSpec, &mut Context) -> Result<Status, BtError> + 'a,
    ) -> Self {
        self.actions.insert(name.to_string(), Box::new(f));
        self
    }

    pub fn condition(
        mut self,
        name: &str,
        f: impl FnMut(&ConditionSpec, &mut Context) -> Result<Status, BtError> + 'a,
    ) -> Self {
        self.conditions.insert(name.to_string(), Box::new(f));
        self
    }
}

impl Handler for Handlers<'_> {
    fn has_action(&self, name: &str) -> bool {
        self.actions.contains_key(name)
    }

    fn has_condition(&self, name: &str) -> bool {
        self.conditions.contains_key(name)
    }

    fn action(&mut self, spec: &ActionSpec, ctx: &mut Context) -> Result<Status, BtError> {
        match self.actions.get_mut(&spec.name) {
            Some(f) => f(spec, ctx),
            None => Err(BtError::UnknownHandler {
                kind: "action",
                name: spec.name.clone(),
            }),
        }
    }

    fn condition(&mut self, spec: &ConditionSpec, ctx: &mut Context) -> Result<Status, BtError> {
        match self.conditions.get_mut(&spec.name) {
            Some(f) => f(spec, ctx),
            None => Err(BtError::UnknownHandler {
                kind: "condition",
                name: spec.name.clone(),
            }),
        }
    }
}

/// A leaf of the compiled tree.
#[derive(Debug, Clone, Copy)]
pub enum Leaf<'a> {
    Action(&'a ActionSpec),
    Condition(&'a ConditionSpec),
}

#[derive(Debug, Clone)]
enum RtKind {
    Sequence,
    Fallback,
    Parallel,
    Decorator(DecoratorKind),
    Action(ActionSpec),
    Condition(ConditionSpec),
}

#[derive(Debug, Clone)]
struct RtNode {
    id: String,
    label: &'static str,
    kind: RtKind,
    children: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct NodeState {
    cursor: usize,
    attempts: u32,
}

pub const DEFAULT_VISIT_BUDGET: usize = 1_000_000;

/// A compiled tree plus its memory (cursors and repeat counters).
#[derive(Debug)]
pub struct Executor {
    nodes: Vec<RtNode>,
    /// Exclusive end of each node's subtree in the pre-order arena.
    subtree_end: Vec<usize>,
    state: Vec<NodeState>,
    ticks: u64,
    visit_budget: usize,
    sink_error: Option<io::Error>,
}

impl Clone for Executor {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            subtree_end: self.subtree_end.clone(),
            state: self.state.clone(),
            ticks: self.ticks,
            visit_budget: self.visit_budget,
            sink_error: None,
        }
    }
}

impl Executor {
    pub fn new(tree: &TreeDef) -> Result<Self, BtError> {
        tree.check()?;
        let mut nodes = Vec::new();
        let mut uses = HashMap::new();
        compile(tree, &tree.root, None, &mut uses, &mut nodes);
        let mut subtree_end = vec![0; nodes.len()];
        for i in (0..nodes.len()).rev() {
            subtree_end[i] = nodes[i].children.last().map_or(i + 1, |&c| subtree_end[c]);
        }
        let state = vec![NodeState::default(); nodes.len()];
        Ok(Self {
            nodes,
            subtree_end,
            state,
            ticks: 0,
            visit_budget: DEFAULT_VISIT_BUDGET,
            sink_error: None,
        })
    }

    pub fn with_visit_budget(mut self, budget: usize) -> Self {
        self.visit_budget = budget;
        self
    }

    /// Number of runtime node instances (skills counted once per use site).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Runtime ids in pre-order.
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    /// Runtime ids of leaves with their specs, in pre-order.
    pub fn leaves(&self) -> impl Iterator<Item = (&str, Leaf<'_>)> {
        self.nodes.iter().filter_map(|n| {
            let leaf = match &n.kind {
                RtKind::Action(a) => Leaf::Action(a),
                RtKind::Condition(c) => Leaf::Condition(c),
                _ => return None,
            };
            Some((n.id.as_str(), leaf))
        })
    }

    /// Fails with `UnknownHandler` for the first leaf name the handler does not know.
    pub fn check_handlers(&self, handler: &dyn Handler) -> Result<(), BtError> {
        for n in &self.nodes {
            match &n.kind {
                RtKind::Action(a) if !handler.has_action(&a.name) => {
                    return Err(BtError::UnknownHandler {
                        kind: "action",
                        name: a.name.clone(),
                    })
                }
                RtKind::Condition(c) if !handler.has_condition(&c.name) => {
                    return Err(BtError::UnknownHandler {
                        kind: "condition",
                        name: c.name.clone(),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Clears cursors and repeat counters. The blackboard and clock live in
    /// [`Context`] and are untouched.
    pub fn reset(&mut self) {
        self.state.fill(NodeState::default());
    }

    /// One full tick from the root.
    ///
    /// Trace records are delivered to `sink` in pre-order after the tick
    /// completes. A sink failure does not change the returned status; it is
    /// kept and can be collected with [`Executor::take_sink_error`].
    pub fn tick(
        &mut self,
        ctx: &mut Context,
        handler: &mut dyn Handler,
        sink: Option<&mut dyn TraceSink>,
    ) -> Result<Status, BtError> {
        self.check_handlers(handler)?;
        let tick_index = self.ticks;
        self.ticks += 1;
        let mut records = sink.is_some().then(Vec::new);
        let mut run = TickRun {
            nodes: &self.nodes,
            subtree_end: &self.subtree_end,
            state: &mut self.state,
            ctx,
            handler,
            records: records.as_mut(),
            tick_index,
            visits: 0,
            budget: self.visit_budget,
        };
        let status = run.tick(0)?;
        if let (Some(sink), Some(records)) = (sink, records) {
            for r in &records {
                if let Err(e) = sink.record(r) {
                    self.sink_error.get_or_insert(e);
                    break;
                }
            }
        }
        Ok(status)
    }

    /// Ticks until the root stops running or `max_ticks` is hit, then surfaces
    /// any trace-sink failure.
    pub fn run_to_completion(
        &mut self,
        ctx: &mut Context,
        handler: &mut dyn Handler,
        mut sink: Option<&mut dyn TraceSink>,
        max_ticks: u64,
    ) -> Result<Status, BtError> {
        for _ in 0..max_ticks {
            let reborrow: Option<&mut dyn TraceSink> = match sink {
                Some(ref mut s) => Some(&mut **s),
                None => None,
            };
            let status = self.tick(ctx, handler, reborrow)?;
            if status != Status::Running {
                if let Some(e) = self.take_sink_error() {
                    return Err(BtError::Trace(e));
                }
                return Ok(status);
            }
        }
        Err(BtError::TickLimit(max_ticks))
    }

    pub fn take_sink_error(&mut self) -> Option<io::Error> {
        self.sink_error.take()
    }
}

/// Convenience wrapper: one tick of an already-compiled tree.
pub fn tick_tree(
    exec: &mut Executor,
    ctx: &mut Context,
    handler: &mut dyn Handler,
) -> Result<Status, BtError> {
    exec.tick(ctx, handler, None)
}

fn compile(
    tree: &TreeDef,
    node: &Node,
    suffix: Option<&str>,
    uses: &mut HashMap<String, usize>,
    out: &mut Vec<RtNode>,
) -> usize {
    if let NodeKind::UseSkill(name) = &node.kind {
        // `check` guarantees resolution and acyclicity.
        let body = &tree.skills[name];
        let count = uses.entry(name.clone()).or_insert(0);
        *count += 1;
        let inst = (*count > 1).then(|| format!("#{count}"));
        let suffix = match (suffix, inst.as_deref()) {
            (Some(a), Some(b)) => Some(format!("{a}{b}")),
            (Some(a), None) => Some(a.to_string()),
            (None, b) => b.map(str::to_string),
        };
        return compile(tree, body, suffix.as_deref(), uses, out);
    }
    let idx = out.len();
    let kind = match &node.kind {
        NodeKind::Sequence => RtKind::Sequence,
        NodeKind::Fallback => RtKind::Fallback,
        NodeKind::Parallel => RtKind::Parallel,
        NodeKind::Decorator(d) => RtKind::Decorator(*d),
        NodeKind::Action(a) => RtKind::Action(a.clone()),
        NodeKind::Condition(c) => RtKind::Condition(c.clone()),
        NodeKind::UseSkill(_) => unreachable!(),
    };
    out.push(RtNode {
        id: match suffix {
            Some(s) => format!("{}{s}", node.id),
            None => node.id.clone(),
        },
        label: node.kind.label(),
        kind,
        children: Vec::new(),
    });
    let children = node
        .children
        .iter()
        .map(|c| compile(tree, c, suffix, uses, out))
        .collect();
    out[idx].children = children;
    idx
}

struct TickRun<'a> {
    nodes: &'a [RtNode],
    subtree_end: &'a [usize],
    state: &'a mut [NodeState],
    ctx: &'a mut Context,
    handler: &'a mut dyn Handler,
    records: Option<&'a mut Vec<TickRecord>>,
    tick_index: u64,
    visits: usize,
    budget: usize,
}

impl TickRun<'_> {
    fn tick(&mut self, idx: usize) -> Result<Status, BtError> {
        self.visits += 1;
        if self.visits > self.budget {
            return Err(BtError::VisitBudget(self.budget));
        }
        let node = &self.nodes[idx];
        let t_enter = self.ctx.clock.now();
        let slot = self.records.as_deref_mut().map(|r| {
            r.push(TickRecord {
                tick_index: self.tick_index,
                node_id: node.id.clone(),
                node_kind: node.label.to_string(),
                status: Status::Running,
                t_enter,
                t_exit: t_enter,
            });
            r.len() - 1
        });

        let status = match &node.kind {
            RtKind::Sequence => self.tick_sequence(idx, Status::Failure)?,
            RtKind::Fallback => self.tick_sequence(idx, Status::Success)?,
            RtKind::Parallel => self.tick_parallel(idx)?,
            RtKind::Decorator(d) => self.tick_decorator(idx, *d)?,
            RtKind::Action(a) => self.handler.action(a, self.ctx)?,
            RtKind::Condition(c) => match self.handler.condition(c, self.ctx)? {
                Status::Running => return Err(BtError::ConditionRunning(c.name.clone())),
                s => s,
            },
        };

        if status != Status::Running {
            self.clear(idx);
        }
        if let (Some(records), Some(i)) = (self.records.as_deref_mut(), slot) {
            records[i].status = status;
            records[i].t_exit = self.ctx.clock.now();
        }
        Ok(status)
    }

    /// Sequence when `stop_on` is Failure, fallback when it is Success.
    fn tick_sequence(&mut self, idx: usize, stop_on: Status) -> Result<Status, BtError> {
        let children = &self.nodes[idx].children;
        let start = self.state[idx].cursor;
        for (i, &child) in children.iter().enumerate().skip(start) {
            match self.tick(child)? {
                Status::Running => {
                    self.state[idx].cursor = i;
                    return Ok(Status::Running);
                }
                s if s == stop_on => return Ok(stop_on),
                _ => {}
            }
        }
        Ok(match stop_on {
            Status::Failure => Status::Success,
            _ => Status::Failure,
        })
    }

    fn tick_parallel(&mut self, idx: usize) -> Result<Status, BtError> {
        let t0 = self.ctx.clock.now();
        let mut t_max = t0;
        let mut any_failure = false;
        let mut all_success = true;
        for &child in &self.nodes[idx].children {
            self.ctx.clock.rewind_to(t0);
            let s = self.tick(child)?;
            t_max = t_max.max(self.ctx.clock.now());
            any_failure |= s == Status::Failure;
            all_success &= s == Status::Success;
        }
        self.ctx.clock.rewind_to(t_max);
        Ok(if any_failure {
            Status::Failure
        } else if all_success {
            Status::Success
        } else {
            Status::Running
        })
    }

    fn tick_decorator(&mut self, idx: usize, kind: DecoratorKind) -> Result<Status, BtError> {
        let child = self.nodes[idx].children[0];
        match kind {
            DecoratorKind::Inverter => Ok(match self.tick(child)? {
                Status::Success => Status::Failure,
                Status::Failure => Status::Success,
                Status::Running => Status::Running,
            }),
            DecoratorKind::ForceSuccess => Ok(match self.tick(child)? {
                Status::Running => Status::Running,
                _ => Status::Success,
            }),
            DecoratorKind::RepeatUntilSuccess { max_repeats } => loop {
                match self.tick(child)? {
                    Status::Failure => {
                        self.state[idx].attempts += 1;
                        self.clear(child);
                        if max_repeats.is_some_and(|m| self.state[idx].attempts >= m) {
                            return Ok(Status::Failure);
                        }
                    }
                    s => return Ok(s),
                }
            },
        }
    }

    fn clear(&mut self, idx: usize) {
        self.state[idx..self.subtree_end[idx]].fill(NodeState::default());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::trace::MemorySink;
    use std::cell::RefCell;
    use std::rc::Rc;

    /// Leaf whose status comes from a script keyed by action name.
    fn scripted<'a>(
        script: &'a RefCell<HashMap<String, Vec<Status>>>,
        log: &'a RefCell<Vec<String>>,
        names: &[&str],
    ) -> Handlers<'a> {
        let mut h = Handlers::new();
        for &n in names {
            h = h.action(n, move |spec, ctx| {
                log.borrow_mut().push(spec.name.clone());
                if let Some(d) = spec.number_arg("duration") {
                    ctx.clock.advance(d);
                }
                let mut s = script.borrow_mut();
                let q = s.get_mut(&spec.name).unwrap();
                Ok(if q.len() > 1 { q.remove(0) } else { q[0] })
            });
        }
        h
    }

    fn script(entries: &[(&str, &[Status])]) -> RefCell<HashMap<String, Vec<Status>>> {
        RefCell::new(
            entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
        )
    }

    use Status::*;

    #[test]
    fn sequence_short_circuits_on_failure() {
        let tree = TreeDef::new(
            "t",
            Node::sequence(vec![
                Node::action("a"),
                Node::action("b"),
                Node::action("c"),
            ]),
        );
        let s = script(&[("a", &[Success]), ("b", &[Failure]), ("c", &[Success])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a", "b", "c"]);
        let mut ex = Executor::new(&tree).unwrap();
        let st = ex.tick(&mut Context::new(), &mut h, None).unwrap();
        assert_eq!(st, Failure);
        assert_eq!(*log.borrow(), ["a", "b"]);
    }

    #[test]
    fn fallback_returns_first_success() {
        let tree = TreeDef::new(
            "t",
            Node::fallback(vec![Node::action("a"), Node::action("b")]),
        );
        let s = script(&[("a", &[Failure]), ("b", &[Success])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a", "b"]);
        let mut ex = Executor::new(&tree).unwrap();
        assert_eq!(ex.tick(&mut Context::new(), &mut h, None).unwrap(), Success);
    }

    #[test]
    fn memory_resumes_at_running_child() {
        let tree = TreeDef::new(
            "t",
            Node::sequence(vec![
                Node::action("a"),
                Node::action("b"),
                Node::action("c"),
            ]),
        );
        let s = script(&[
            ("a", &[Success]),
            ("b", &[Running, Success]),
            ("c", &[Success]),
        ]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a", "b", "c"]);
        let mut ex = Executor::new(&tree).unwrap();
        let mut ctx = Context::new();
        assert_eq!(ex.tick(&mut ctx, &mut h, None).unwrap(), Running);
        assert_eq!(ex.tick(&mut ctx, &mut h, None).unwrap(), Success);
        assert_eq!(*log.borrow(), ["a", "b", "b", "c"]);
    }

    #[test]
    fn reset_restarts_from_first_child_and_keeps_clock() {
        let tree = TreeDef::new(
            "t",
            Node::sequence(vec![Node::action("a"), Node::action("b")]),
        );
        let s = script(&[("a", &[Success]), ("b", &[Running])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a", "b"]);
        let mut ex = Executor::new(&tree).unwrap();
        let mut ctx = Context::new();
        ctx.clock.advance(5.0);
        ex.tick(&mut ctx, &mut h, None).unwrap();
        ex.reset();
        ex.reset();
        assert_eq!(ctx.clock.now(), 5.0);
        ex.tick(&mut ctx, &mut h, None).unwrap();
        assert_eq!(*log.borrow(), ["a", "b", "a", "b"]);
    }

    #[test]
    fn parallel_takes_max_duration() {
        let a = Node::action_spec(
            ActionSpec::new("a").with_arg("duration", crate::bt::ArgValue::Number(3.0)),
        );
        let b = Node::action_spec(
            ActionSpec::new("b").with_arg("duration", crate::bt::ArgValue::Number(2.0)),
        );
        let tree = TreeDef::new("t", Node::parallel(vec![a, b]));
        let s = script(&[("a", &[Success]), ("b", &[Success])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a", "b"]);
        let mut ex = Executor::new(&tree).unwrap();
        let mut ctx = Context::new();
        ctx.clock.advance(10.0);
        let mut sink = MemorySink::new();
        assert_eq!(ex.tick(&mut ctx, &mut h, Some(&mut sink)).unwrap(), Success);
        assert_eq!(ctx.clock.now(), 13.0);
        let r = &sink.records;
        assert_eq!(r.len(), 3);
        assert_eq!(r[1].t_enter, 10.0);
        assert_eq!(r[2].t_enter, 10.0);
        assert_eq!(r[0].t_exit, 13.0);
    }

    #[test]
    fn parallel_fails_fast_but_visits_everyone() {
        let tree = TreeDef::new(
            "t",
            Node::parallel(vec![
                Node::action("a"),
                Node::action("b"),
                Node::action("c"),
            ]),
        );
        let s = script(&[("a", &[Failure]), ("b", &[Running]), ("c", &[Success])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a", "b", "c"]);
        let mut ex = Executor::new(&tree).unwrap();
        assert_eq!(ex.tick(&mut Context::new(), &mut h, None).unwrap(), Failure);
        assert_eq!(*log.borrow(), ["a", "b", "c"]);
    }

    #[test]
    fn decorators() {
        let cases: &[(DecoratorKind, Status, Status)] = &[
            (DecoratorKind::Inverter, Success, Failure),
            (DecoratorKind::Inverter, Failure, Success),
            (DecoratorKind::Inverter, Running, Running),
            (DecoratorKind::ForceSuccess, Failure, Success),
            (DecoratorKind::ForceSuccess, Running, Running),
        ];
        for &(kind, child, expect) in cases {
            let tree = TreeDef::new("t", Node::decorator(kind, Node::action("a")));
            let s = script(&[("a", &[child])]);
            let log = RefCell::new(Vec::new());
            let mut h = scripted(&s, &log, &["a"]);
            let mut ex = Executor::new(&tree).unwrap();
            assert_eq!(
                ex.tick(&mut Context::new(), &mut h, None).unwrap(),
                expect,
                "{kind:?} {child:?}"
            );
        }
    }

    #[test]
    fn repeat_until_success_bounded() {
        let tree = TreeDef::new(
            "t",
            Node::decorator(
                DecoratorKind::RepeatUntilSuccess {
                    max_repeats: Some(3),
                },
                Node::action("a"),
            ),
        );
        let s = script(&[("a", &[Failure])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a"]);
        let mut ex = Executor::new(&tree).unwrap();
        assert_eq!(ex.tick(&mut Context::new(), &mut h, None).unwrap(), Failure);
        assert_eq!(log.borrow().len(), 3);

        let s = script(&[("a", &[Failure, Failure, Success])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a"]);
        let mut ex = Executor::new(&tree).unwrap();
        assert_eq!(ex.tick(&mut Context::new(), &mut h, None).unwrap(), Success);
        assert_eq!(log.borrow().len(), 3);
    }

    #[test]
    fn repeat_resets_child_memory_between_attempts() {
        // sequence[a, b]: b fails once, so the retry must start again at a.
        let tree = TreeDef::new(
            "t",
            Node::decorator(
                DecoratorKind::RepeatUntilSuccess { max_repeats: None },
                Node::sequence(vec![Node::action("a"), Node::action("b")]),
            ),
        );
        let s = script(&[("a", &[Success]), ("b", &[Failure, Success])]);
        let log = RefCell::new(Vec::new());
        let mut h = scripted(&s, &log, &["a", "b"]);
        let mut ex = Executor::new(&tree).unwrap();
        assert_eq!(ex.tick(&mut Context::new(), &mut h, None).unwrap(), Success);
        assert_eq!(*log.borrow(), ["a", "b", "a", "b"]);
    }

    #[test]
    fn unbounded_repeat_hits_visit_budget() {
        let tree = TreeDef::new(
            "t",
            Node::decorator(
                DecoratorKind::RepeatUntilSuccess { max_repeats: None },
                Node::action("a"),
            ),
        );
        let mut h = Handlers::new().action("a", |_, _| Ok(Failure));
        let mut ex = Executor::new(&tree).unwrap().with_visit_budget(1000);
        assert!(matches!(
            ex.tick(&mut Context::new(), &mut h, None),
            Err(BtError::VisitBudget(1000))
        ));
    }

    #[test]
    fn unknown_handler_and_running_condition() {
        let tree = TreeDef::new("t", Node::action("nope"));
        let mut ex = Executor::new(&tree).unwrap();
        let mut h = Handlers::new();
        assert!(matches!(
            ex.tick(&mut Context::new(), &mut h, None),
            Err(BtError::UnknownHandler { kind: "action", .. })
        ));

        let tree = TreeDef::new("t", Node::condition(ConditionSpec::deterministic("c")));
        let mut ex = Executor::new(&tree).unwrap();
        let mut h = Handlers::new().condition("c", |_, _| Ok(Running));
        assert!(matches!(
            ex.tick(&mut Context::new(), &mut h, None),
            Err(BtError::ConditionRunning(_))
        ));
    }

    #[test]
    fn blackboard_type_error_propagates() {
        let tree = TreeDef::new("t", Node::condition(ConditionSpec::deterministic("c")));
        let mut ex = Executor::new(&tree).unwrap();
        let mut h = Handlers::new().condition("c", |_, ctx| {
            Ok(Status::from_bool(ctx.blackboard.get_bool("k")?))
        });
        let mut ctx = Context::new();
        ctx.blackboard.put("k", 1i64);
        assert!(matches!(
            ex.tick(&mut ctx, &mut h, None),
            Err(BtError::Blackboard(BlackboardError::TypeMismatch { .. }))
        ));
    }

    #[test]
    fn trace_visit_order_and_tracing_off() {
        let tree = TreeDef::new(
            "t",
            Node::sequence(vec![Node::action("a"), Node::action("b")]),
        );
        let mut h = Handlers::new()
            .action("a", |_, _| Ok(Success))
            .action("b", |_, _| Ok(Success));
        let mut ex = Executor::new(&tree).unwrap();
        let mut sink = MemorySink::new();
        let with = ex
            .tick(&mut Context::new(), &mut h, Some(&mut sink))
            .unwrap();
        let ids: Vec<_> = sink.records.iter().map(|r| r.node_id.as_str()).collect();
        assert_eq!(ids, ["t.0", "t.1", "t.2"]);
        let without = ex.tick(&mut Context::new(), &mut h, None).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn sink_failure_does_not_change_status() {
        let tree = TreeDef::new("t", Node::action("a"));
        let mut h = Handlers::new().action("a", |_, _| Ok(Success));
        let mut ex = Executor::new(&tree).unwrap();
        let mut failing = |_: &TickRecord| Err(io::Error::other("disk full"));
        let st = ex
            .tick(&mut Context::new(), &mut h, Some(&mut failing))
            .unwrap();
        assert_eq!(st, Success);
        assert!(ex.take_sink_error().is_some());

        let mut failing = |_: &TickRecord| Err(io::Error::other("disk full"));
        let r = ex.run_to_completion(&mut Context::new(), &mut h, Some(&mut failing), 10);
        assert!(matches!(r, Err(BtError::Trace(_))));
    }

    #[test]
    fn skills_inline_with_distinct_instance_ids() {
        let tree = TreeDef::new(
            "t",
            Node::sequence(vec![Node::use_skill("s"), Node::use_skill("s")]),
        )
        .with_skill("s", Node::action("a"));
        let count = Rc::new(RefCell::new(0));
        let c2 = count.clone();
        let mut h = Handlers::new().action("a", move |_, _| {
            *c2.borrow_mut() += 1;
            Ok(Success)
        });
        let mut ex = Executor::new(&tree).unwrap();
        let ids: Vec<_> = ex.node_ids().map(str::to_string).collect();
        assert_eq!(ids, ["t.0", "s.0", "s.0#2"]);
        ex.tick(&mut Context::new(), &mut h, None).unwrap();
        assert_eq!(*count.borrow(), 2);
    }
}
