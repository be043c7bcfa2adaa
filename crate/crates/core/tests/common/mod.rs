#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mmbt_core::bt::{
    ActionSpec, ArgValue, BtError, ConditionSpec, Context, DecoratorKind, Executor, Handlers, Leaf,
    MemorySink, Node, Status, TickRecord, TreeDef,
};
use mmbt_core::fusion::FusionPolicy;
use proptest::prelude::*;

const ACTION_NAMES: &[&str] = &["grip", "move_a", "probe", "x1", "wait_long"];
const CONDITION_NAMES: &[&str] = &["ok", "seen", "held", "c2"];
const MODALITIES: &[&str] = &["vision", "ft", "tactile", "depth"];

fn policy() -> impl Strategy<Value = FusionPolicy> {
    (1usize..=4)
        .prop_flat_map(|n| (prop::collection::vec(0.01f64..1.0, n), 0.0f64..=1.0))
        .prop_map(|(raw, lambda)| {
            let total: f64 = raw.iter().sum();
            let mods = MODALITIES[..raw.len()]
                .iter()
                .map(|s| s.to_string())
                .collect();
            FusionPolicy::new(mods, raw.iter().map(|x| x / total).collect(), lambda).unwrap()
        })
}

fn leaf() -> impl Strategy<Value = Node> {
    prop_oneof![
        (
            prop::sample::select(ACTION_NAMES),
            prop::option::of(0.0f64..100.0),
            prop::option::of(prop::sample::select(&["fast", "slow", "z_9"][..]))
        )
            .prop_map(|(name, d, mode)| {
                let mut spec = ActionSpec::new(name);
                if let Some(d) = d {
                    spec = spec.with_arg("duration", ArgValue::Number(d));
                }
                if let Some(m) = mode {
                    spec = spec.with_arg("mode", ArgValue::Text(m.to_string()));
                }
                Node::action_spec(spec)
            }),
        (
            prop::sample::select(CONDITION_NAMES),
            prop::option::of(policy())
        )
            .prop_map(|(name, policy)| {
                Node::condition(ConditionSpec {
                    name: name.to_string(),
                    policy,
                })
            }),
    ]
}

/// Bodies of depth at most 6 and fan-out at most 4.
pub fn body() -> impl Strategy<Value = Node> {
    leaf().prop_recursive(5, 64, 4, |inner| {
        prop_oneof![
            (0u8..3, prop::collection::vec(inner.clone(), 1..=4)).prop_map(
                |(k, children)| match k {
                    0 => Node::sequence(children),
                    1 => Node::fallback(children),
                    _ => Node::parallel(children),
                }
            ),
            (0u8..3, 1u32..10, inner).prop_map(|(k, max, child)| {
                let kind = match k {
                    0 => DecoratorKind::Inverter,
                    1 => DecoratorKind::ForceSuccess,
                    _ => DecoratorKind::RepeatUntilSuccess {
                        max_repeats: (max % 2 == 0).then_some(max),
                    },
                };
                Node::decorator(kind, child)
            }),
        ]
    })
}

/// A tree with up to two skills, each referenced from the root.
pub fn arb_tree() -> impl Strategy<Value = TreeDef> {
    (body(), prop::collection::vec(body(), 0..=2)).prop_map(|(root, skills)| {
        let root = if skills.is_empty() {
            root
        } else {
            let mut children = vec![root];
            children.extend((0..skills.len()).map(|i| Node::use_skill(format!("s{i}"))));
            Node::sequence(children)
        };
        let mut tree = TreeDef::new("t", root);
        for (i, s) in skills.into_iter().enumerate() {
            tree = tree.with_skill(format!("s{i}"), s);
        }
        tree
    })
}

/// Mostly-grammatical noise: DSL fragments mixed with arbitrary characters.
pub fn fuzz_input() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        prop::sample::select(
            &[
                "tree",
                "skill",
                "sequence",
                "fallback",
                "parallel",
                "inverter",
                "force_success",
                "repeat_until_success",
                "max=",
                "action",
                "condition",
                "use_skill",
                "modalities=",
                "weights=",
                "lambda=",
                "[",
                "]",
                ",",
                "=",
                " ",
                "  ",
                "\n",
                "\n  ",
                "\n    ",
                "\t",
                "\r\n",
                "#",
                "0.5",
                "1",
                "-1e3",
                "1e999",
                "x",
                "a_b",
                "..",
                "vision",
                "ft",
            ][..]
        )
        .prop_map(str::to_string),
        any::<char>().prop_map(|c| c.to_string()),
    ];
    prop::collection::vec(piece, 0..40).prop_map(|v| v.concat())
}

/// Handler where action `a{i}` returns `script[i]` on successive calls
/// (repeating the last entry) and takes `durations[i]` seconds.
pub fn scripted(script: Vec<Vec<Status>>, durations: Vec<f64>) -> Handlers<'static> {
    let mut h = Handlers::new();
    for (i, statuses) in script.into_iter().enumerate() {
        let d = durations.get(i).copied().unwrap_or(0.0);
        let mut calls = 0usize;
        h = h.action(&format!("a{i}"), move |_, ctx: &mut Context| {
            let s = statuses[calls.min(statuses.len() - 1)];
            calls += 1;
            ctx.clock.advance(d);
            Ok(s)
        });
    }
    h
}

fn leaves_by_id(exec: &Executor) -> BTreeMap<String, String> {
    exec.leaves()
        .map(|(id, leaf)| {
            let name = match leaf {
                Leaf::Action(a) => a.name.clone(),
                Leaf::Condition(c) => c.name.clone(),
            };
            (id.to_string(), name)
        })
        .collect()
}

fn visited(records: &[TickRecord], tick: u64, names: &BTreeMap<String, String>) -> Vec<String> {
    records
        .iter()
        .filter(|r| r.tick_index == tick && r.node_kind == "action")
        .map(|r| names[&r.node_id].clone())
        .collect()
}

fn actions(n: usize) -> Vec<Node> {
    (0..n).map(|i| Node::action(format!("a{i}"))).collect()
}

fn status(ok: bool) -> Status {
    Status::from_bool(ok)
}

/// Sequence stops at the first failure, fallback at the first success.
pub fn check_short_circuit(fallback: bool, outcomes: &[bool]) -> Result<(), String> {
    let n = outcomes.len();
    let root = if fallback {
        Node::fallback(actions(n))
    } else {
        Node::sequence(actions(n))
    };
    let tree = TreeDef::new("t", root);
    let mut exec = Executor::new(&tree).map_err(|e| e.to_string())?;
    let names = leaves_by_id(&exec);
    let mut h = scripted(outcomes.iter().map(|o| vec![status(*o)]).collect(), vec![]);
    let mut sink = MemorySink::new();
    let got = exec
        .tick(&mut Context::new(), &mut h, Some(&mut sink))
        .map_err(|e| e.to_string())?;
    let stop = outcomes.iter().position(|o| *o == fallback);
    let expect_len = stop.map_or(n, |k| k + 1);
    let expected: Vec<String> = (0..expect_len).map(|i| format!("a{i}")).collect();
    let seen = visited(&sink.records, 0, &names);
    if seen != expected {
        return Err(format!("visited {seen:?}, expected {expected:?}"));
    }
    let want = match (fallback, stop) {
        (true, Some(_)) => Status::Success,
        (true, None) => Status::Failure,
        (false, Some(_)) => Status::Failure,
        (false, None) => Status::Success,
    };
    if got != want {
        return Err(format!("root returned {got:?}, expected {want:?}"));
    }
    Ok(())
}

/// A running child is resumed without re-ticking its earlier siblings.
pub fn check_memory_resumption(n: usize, running: usize) -> Result<(), String> {
    let tree = TreeDef::new("t", Node::sequence(actions(n)));
    let mut exec = Executor::new(&tree).map_err(|e| e.to_string())?;
    let names = leaves_by_id(&exec);
    let script = (0..n)
        .map(|i| {
            if i == running {
                vec![Status::Running, Status::Success]
            } else {
                vec![Status::Success]
            }
        })
        .collect();
    let mut h = scripted(script, vec![]);
    let mut sink = MemorySink::new();
    let mut ctx = Context::new();
    let first = exec
        .tick(&mut ctx, &mut h, Some(&mut sink))
        .map_err(|e| e.to_string())?;
    let second = exec
        .tick(&mut ctx, &mut h, Some(&mut sink))
        .map_err(|e| e.to_string())?;
    if (first, second) != (Status::Running, Status::Success) {
        return Err(format!("statuses {first:?}, {second:?}"));
    }
    let t0: Vec<String> = (0..=running).map(|i| format!("a{i}")).collect();
    let t1: Vec<String> = (running..n).map(|i| format!("a{i}")).collect();
    let (s0, s1) = (
        visited(&sink.records, 0, &names),
        visited(&sink.records, 1, &names),
    );
    if s0 != t0 || s1 != t1 {
        return Err(format!("tick 0 visited {s0:?}, tick 1 visited {s1:?}"));
    }
    Ok(())
}

/// Every parallel child is ticked, even after one fails.
pub fn check_parallel_visits(outcomes: &[bool]) -> Result<(), String> {
    let tree = TreeDef::new("t", Node::parallel(actions(outcomes.len())));
    let mut exec = Executor::new(&tree).map_err(|e| e.to_string())?;
    let names = leaves_by_id(&exec);
    let mut h = scripted(outcomes.iter().map(|o| vec![status(*o)]).collect(), vec![]);
    let mut sink = MemorySink::new();
    let got = exec
        .tick(&mut Context::new(), &mut h, Some(&mut sink))
        .map_err(|e| e.to_string())?;
    let seen: BTreeSet<String> = visited(&sink.records, 0, &names).into_iter().collect();
    if seen.len() != outcomes.len() {
        return Err(format!(
            "visited {} of {} children",
            seen.len(),
            outcomes.len()
        ));
    }
    let want = status(outcomes.iter().all(|o| *o));
    if got != want {
        return Err(format!("parallel returned {got:?}, expected {want:?}"));
    }
    Ok(())
}

/// A parallel node takes as long as its slowest child; children start together.
pub fn check_parallel_time(durations: &[f64]) -> Result<(), String> {
    let n = durations.len();
    let tree = TreeDef::new("t", Node::parallel(actions(n)));
    let mut exec = Executor::new(&tree).map_err(|e| e.to_string())?;
    let mut h = scripted(vec![vec![Status::Success]; n], durations.to_vec());
    let mut sink = MemorySink::new();
    let mut ctx = Context::new();
    exec.tick(&mut ctx, &mut h, Some(&mut sink))
        .map_err(|e| e.to_string())?;
    let root = &sink.records[0];
    let max = durations.iter().copied().fold(0.0, f64::max);
    if (root.t_exit - root.t_enter - max).abs() > 1e-9 || (ctx.clock.now() - max).abs() > 1e-9 {
        return Err(format!(
            "parallel took {} s, expected {max}",
            root.t_exit - root.t_enter
        ));
    }
    if sink.records[1..].iter().any(|r| r.t_enter != root.t_enter) {
        return Err("a parallel child did not start at the parallel entry time".into());
    }
    Ok(())
}

/// A condition handler that answers Running is an engine error.
pub fn check_condition_never_running() -> Result<(), String> {
    let tree = TreeDef::new(
        "t",
        Node::sequence(vec![Node::condition(ConditionSpec::deterministic("c"))]),
    );
    let mut exec = Executor::new(&tree).map_err(|e| e.to_string())?;
    let mut h = Handlers::new().condition("c", |_, _| Ok(Status::Running));
    match exec.tick(&mut Context::new(), &mut h, None) {
        Err(BtError::ConditionRunning(name)) if name == "c" => Ok(()),
        other => Err(format!("expected ConditionRunning, got {other:?}")),
    }
}
