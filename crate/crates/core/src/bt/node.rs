//! Tree data model: node kinds, tree definitions and skill resolution.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::fusion::FusionPolicy;

/// Result of ticking a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Success,
    Failure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Success => "success",
            Status::Failure => "failure",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Success
        } else {
            Status::Failure
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 1-based line/column position in a `.bt` source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
}

impl SourceSpan {
    pub fn new(line: usize, column: usize) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self { line, column }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecoratorKind {
    Inverter,
    /// `None` means unbounded; the validator insists on a guard condition in that case.
    RepeatUntilSuccess {
        max_repeats: Option<u32>,
    },
    ForceSuccess,
}

/// Value of an action keyword argument (`duration=2`, `frame=pick`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Number(f64),
    Text(String),
}

impl ArgValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ArgValue::Number(x) => Some(*x),
            ArgValue::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    pub args: BTreeMap<String, ArgValue>,
}

impl ActionSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            args: BTreeMap::new(),
        }
    }

    pub fn with_arg(mut self, key: impl Into<String>, value: ArgValue) -> Self {
        self.args.insert(key.into(), value);
        self
    }

    pub fn number_arg(&self, key: &str) -> Option<f64> {
        self.args.get(key).and_then(ArgValue::as_number)
    }
}

/// A condition leaf. `policy` is present for multimodal (fused) conditions and
/// absent for deterministic ones such as iteration guards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub name: String,
    pub policy: Option<FusionPolicy>,
}

impl ConditionSpec {
    pub fn deterministic(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            policy: None,
        }
    }

    pub fn fused(name: impl Into<String>, policy: FusionPolicy) -> Self {
        Self {
            name: name.into(),
            policy: Some(policy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Sequence,
    Fallback,
    Parallel,
    Decorator(DecoratorKind),
    Action(ActionSpec),
    Condition(ConditionSpec),
    /// Reference to a named skill subtree, resolved at compile time.
    UseSkill(String),
}

impl NodeKind {
    /// Short label used in traces.
    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::Sequence => "sequence",
            NodeKind::Fallback => "fallback",
            NodeKind::Parallel => "parallel",
            NodeKind::Decorator(DecoratorKind::Inverter) => "inverter",
            NodeKind::Decorator(DecoratorKind::ForceSuccess) => "force_success",
            NodeKind::Decorator(DecoratorKind::RepeatUntilSuccess { .. }) => "repeat_until_success",
            NodeKind::Action(_) => "action",
            NodeKind::Condition(_) => "condition",
            NodeKind::UseSkill(_) => "use_skill",
        }
    }

    pub fn is_composite(&self) -> bool {
        matches!(
            self,
            NodeKind::Sequence | NodeKind::Fallback | NodeKind::Parallel
        )
    }

    pub fn is_leaf(&self) -> bool {
        matches!(
            self,
            NodeKind::Action(_) | NodeKind::Condition(_) | NodeKind::UseSkill(_)
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub children: Vec<Node>,
    /// Where the node was declared, when it came from source text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SourceSpan>,
}

impl Node {
    pub fn new(kind: NodeKind, children: Vec<Node>) -> Self {
        Self {
            id: String::new(),
            kind,
            children,
            span: None,
        }
    }

    pub fn sequence(children: Vec<Node>) -> Self {
        Self::new(NodeKind::Sequence, children)
    }

    pub fn fallback(children: Vec<Node>) -> Self {
        Self::new(NodeKind::Fallback, children)
    }

    pub fn parallel(children: Vec<Node>) -> Self {
        Self::new(NodeKind::Parallel, children)
    }

    pub fn decorator(kind: DecoratorKind, child: Node) -> Self {
        Self::new(NodeKind::Decorator(kind), vec![child])
    }

    pub fn action(name: impl Into<String>) -> Self {
        Self::new(NodeKind::Action(ActionSpec::new(name)), Vec::new())
    }

    pub fn action_spec(spec: ActionSpec) -> Self {
        Self::new(NodeKind::Action(spec), Vec::new())
    }

    pub fn condition(spec: ConditionSpec) -> Self {
        Self::new(NodeKind::Condition(spec), Vec::new())
    }

    pub fn use_skill(name: impl Into<String>) -> Self {
        Self::new(NodeKind::UseSkill(name.into()), Vec::new())
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Pre-order walk over this node and all descendants.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    /// Equality of kind and shape, ignoring ids and spans. Fusion weights and
    /// thresholds compare within `tol`.
    pub fn structurally_eq(&self, other: &Node, tol: f64) -> bool {
        let kinds_match = match (&self.kind, &other.kind) {
            (NodeKind::Condition(a), NodeKind::Condition(b)) => {
                a.name == b.name
                    && match (&a.policy, &b.policy) {
                        (None, None) => true,
                        (Some(p), Some(q)) => p.approx_eq(q, tol),
                        _ => false,
                    }
            }
            (NodeKind::Action(a), NodeKind::Action(b)) => {
                a.name == b.name
                    && a.args.len() == b.args.len()
                    && a.args.iter().zip(&b.args).all(|((ka, va), (kb, vb))| {
                        ka == kb
                            && match (va, vb) {
                                (ArgValue::Number(x), ArgValue::Number(y)) => {
                                    (x - y).abs() <= tol * x.abs().max(1.0)
                                }
                                _ => va == vb,
                            }
                    })
            }
            (a, b) => a == b,
        };
        kinds_match
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.structurally_eq(b, tol))
    }

    /// Checks the arity rules for this node and its subtree, returning the
    /// first offending node.
    pub fn check_arity(&self) -> Result<(), &Node> {
        let ok = match &self.kind {
            NodeKind::Sequence | NodeKind::Fallback | NodeKind::Parallel => {
                !self.children.is_empty()
            }
            NodeKind::Decorator(_) => self.children.len() == 1,
            NodeKind::Action(_) | NodeKind::Condition(_) | NodeKind::UseSkill(_) => {
                self.children.is_empty()
            }
        };
        if !ok {
            return Err(self);
        }
        self.children.iter().try_for_each(Node::check_arity)
    }

    fn assign_ids(&mut self, prefix: &str, counter: &mut usize) {
        self.id = format!("{prefix}.{counter}");
        *counter += 1;
        for c in &mut self.children {
            c.assign_ids(prefix, counter);
        }
    }
}

/// A named tree plus the skills (reusable subtrees) it may reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeDef {
    pub name: String,
    pub root: Node,
    pub skills: IndexMap<String, Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("node `{id}` ({kind}) has {count} children")]
    Arity {
        id: String,
        kind: &'static str,
        count: usize,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("unresolved skill `{0}`")]
    UnresolvedSkill(String),
    #[error("skill cycle: {}", .0.join(" -> "))]
    SkillCycle(Vec<String>),
}

impl TreeDef {
    pub fn new(name: impl Into<String>, root: Node) -> Self {
        let mut t = Self {
            name: name.into(),
            root,
            skills: IndexMap::new(),
        };
        t.renumber();
        t
    }

    pub fn with_skill(mut self, name: impl Into<String>, body: Node) -> Self {
        self.skills.insert(name.into(), body);
        self.renumber();
        self
    }

    /// Assigns canonical pre-order ids: `<tree>.<n>` for the root tree and
    /// `<skill>.<n>` inside each skill.
    pub fn renumber(&mut self) {
        let mut n = 0;
        self.root.assign_ids(&self.name, &mut n);
        for (name, body) in self.skills.iter_mut() {
            let mut n = 0;
            body.assign_ids(name, &mut n);
        }
    }

    pub fn structurally_eq(&self, other: &TreeDef, tol: f64) -> bool {
        self.name == other.name
            && self.root.structurally_eq(&other.root, tol)
            && self.skills.len() == other.skills.len()
            && self
                .skills
                .iter()
                .zip(&other.skills)
                .all(|((na, a), (nb, b))| na == nb && a.structurally_eq(b, tol))
    }

    /// Verifies arity, id uniqueness, skill resolution and acyclicity.
    pub fn check(&self) -> Result<(), TreeError> {
        let bodies = std::iter::once(&self.root).chain(self.skills.values());
        let mut seen = std::collections::HashSet::new();
        for body in bodies {
            body.check_arity().map_err(|n| TreeError::Arity {
                id: n.id.clone(),
                kind: n.kind.label(),
                count: n.children.len(),
            })?;
            let mut dup = None;
            body.walk(&mut |n| {
                if dup.is_none() && !seen.insert(n.id.as_str()) {
                    dup = Some(n.id.clone());
                }
            });
            if let Some(id) = dup {
                return Err(TreeError::DuplicateId(id));
            }
        }
        self.skill_order().map(|_| ())
    }

    /// Names of skills directly referenced by `node`'s subtree, in pre-order.
    pub fn skill_refs(node: &Node) -> Vec<&str> {
        let mut out = Vec::new();
        node.walk(&mut |n| {
            if let NodeKind::UseSkill(s) = &n.kind {
                out.push(s.as_str());
            }
        });
        out
    }

    /// Depth-first resolution of every skill reachable from the root and from
    /// every declared skill. Fails on unresolved names or cycles.
    fn skill_order(&self) -> Result<Vec<&str>, TreeError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        fn visit<'a>(
            tree: &'a TreeDef,
            name: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
            order: &mut Vec<&'a str>,
        ) -> Result<(), TreeError> {
            match marks.get(name) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Active) => {
                    let start = stack.iter().position(|s| *s == name).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(name.to_string());
                    return Err(TreeError::SkillCycle(cycle));
                }
                None => {}
            }
            let body = tree
                .skills
                .get(name)
                .ok_or_else(|| TreeError::UnresolvedSkill(name.to_string()))?;
            marks.insert(name, Mark::Active);
            stack.push(name);
            for r in TreeDef::skill_refs(body) {
                visit(tree, r, marks, stack, order)?;
            }
            stack.pop();
            marks.insert(name, Mark::Done);
            order.push(name);
            Ok(())
        }

        let mut marks = BTreeMap::new();
        let mut order = Vec::new();
        let mut stack = Vec::new();
        for r in Self::skill_refs(&self.root) {
            visit(self, r, &mut marks, &mut stack, &mut order)?;
        }
        for name in self.skills.keys() {
            visit(self, name, &mut marks, &mut stack, &mut order)?;
        }
        Ok(order)
    }

    /// Every action name reachable from the root, skills expanded.
    pub fn action_names(&self) -> Vec<String> {
        self.collect_leaves(|k| match k {
            NodeKind::Action(a) => Some(a.name.clone()),
            _ => None,
        })
    }

    /// Every condition reachable from the root, skills expanded, deduplicated by name.
    pub fn conditions(&self) -> Vec<ConditionSpec> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        self.for_each_reachable(&mut |n| {
            if let NodeKind::Condition(c) = &n.kind {
                if seen.insert(c.name.clone()) {
                    out.push(c.clone());
                }
            }
        });
        out
    }

    fn collect_leaves(&self, f: impl Fn(&NodeKind) -> Option<String>) -> Vec<String> {
        let mut set = std::collections::BTreeSet::new();
        self.for_each_reachable(&mut |n| {
            if let Some(s) = f(&n.kind) {
                set.insert(s);
            }
        });
        set.into_iter().collect()
    }

    /// Visits reachable nodes, descending into skill bodies at each use site.
    /// Assumes the tree passed [`TreeDef::check`].
    pub fn for_each_reachable<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        fn go<'a>(tree: &'a TreeDef, node: &'a Node, depth: usize, f: &mut impl FnMut(&'a Node)) {
            f(node);
            if let NodeKind::UseSkill(s) = &node.kind {
                if let Some(body) = tree.skills.get(s) {
                    if depth < 64 {
                        go(tree, body, depth + 1, f);
                    }
                }
            }
            for c in &node.children {
                go(tree, c, depth, f);
            }
        }
        go(self, &self.root, 0, f);
    }

    /// Root-level skill names as listed under the root composite, if any.
    pub fn top_level_skills(&self) -> Vec<&str> {
        self.root
            .children
            .iter()
            .filter_map(|c| match &c.kind {
                NodeKind::UseSkill(s) => Some(s.as_str()),
                _ => None,
            })
            .collect()
    }
}
