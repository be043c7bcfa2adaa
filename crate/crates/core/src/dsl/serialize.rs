use std::fmt::Write;

use crate::bt::{ArgValue, DecoratorKind, Node, NodeKind, TreeDef};

/// Renders `x` with at most 12 significant digits, in its shortest form.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// Canonical text form: the tree first, then skills in declaration order,
/// separated by blank lines. Two-space indentation, trailing newline.
pub fn serialize(tree: &TreeDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tree {}", tree.name);
    write_node(&mut out, &tree.root, 1);
    for (name, body) in &tree.skills {
        let _ = writeln!(out, "\nskill {name}");
        write_node(&mut out, body, 1);
    }
    out
}

fn write_node(out: &mut String, node: &Node, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    match &node.kind {
        NodeKind::Sequence => out.push_str("sequence"),
        NodeKind::Fallback => out.push_str("fallback"),
        NodeKind::Parallel => out.push_str("parallel"),
        NodeKind::Decorator(DecoratorKind::Inverter) => out.push_str("inverter"),
        NodeKind::Decorator(DecoratorKind::ForceSuccess) => out.push_str("force_success"),
        NodeKind::Decorator(DecoratorKind::RepeatUntilSuccess { max_repeats }) => {
            out.push_str("repeat_until_success");
            if let Some(m) = max_repeats {
                let _ = write!(out, " max={m}");
            }
        }
        NodeKind::Action(a) => {
            let _ = write!(out, "action {}", a.name);
            for (k, v) in &a.args {
                match v {
                    ArgValue::Number(x) => {
                        let _ = write!(out, " {k}={}", format_number(*x));
                    }
                    ArgValue::Text(s) => {
                        let _ = write!(out, " {k}={s}");
                    }
                }
            }
        }
        NodeKind::Condition(c) => {
            let _ = write!(out, "condition {}", c.name);
            if let Some(p) = &c.policy {
                let weights: Vec<String> = p.weights().iter().map(|w| format_number(*w)).collect();
                let _ = write!(
                    out,
                    " modalities=[{}] weights=[{}] lambda={}",
                    p.modalities().join(","),
                    weights.join(","),
                    format_number(p.threshold())
                );
            }
        }
        NodeKind::UseSkill(s) => {
            let _ = write!(out, "use_skill {s}");
        }
    }
    out.push('\n');
    for c in &node.children {
        write_node(out, c, depth + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn numbers() {
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(-4.25), "-4.25");
        assert_eq!(format_number(1e-7), "0.0000001");
    }

    #[test]
    fn canonical_and_stable() {
        let src = "# comment\ntree t\n  sequence\n      # indented comment\n    action a   duration=2.0 b=x\n    condition c modalities=[ a , b ] weights=[0.5,0.5]\n    use_skill s\nskill s\n  action z\n";
        let t = parse(src).unwrap();
        let once = serialize(&t);
        assert_eq!(
            once,
            "tree t\n  sequence\n    action a b=x duration=2\n    condition c modalities=[a,b] weights=[0.5,0.5] lambda=0.5\n    use_skill s\n\nskill s\n  action z\n"
        );
        let again = serialize(&parse(&once).unwrap());
        assert_eq!(once, again);
    }

    #[test]
    fn thirds_survive_round_trip() {
        let src = format!(
            "tree t\n  condition c modalities=[a,b,c] weights=[{w},{w},{w}]\n",
            w = 1.0 / 3.0
        );
        let t = parse(&src).unwrap();
        let back = parse(&serialize(&t)).unwrap();
        match &back.root.kind {
            NodeKind::Condition(c) => {
                let sum: f64 = c.policy.as_ref().unwrap().weights().iter().sum();
                assert!((sum - 1.0).abs() <= 1e-9);
            }
            k => panic!("{k:?}"),
        }
        assert!(t.structurally_eq(&back, 1e-9));
    }

    #[test]
    fn crlf_accepted() {
        let t = parse("tree t\r\n  action a\r\n").unwrap();
        assert_eq!(serialize(&t), "tree t\n  action a\n");
    }
}
