use std::collections::BTreeSet;

use crate::bt::{DecoratorKind, Node, NodeKind, SourceSpan, TreeDef, TreeError};

use super::{DiagCode, Diagnostic};

/// Condition names that count as loop-terminating guards by default.
pub const DEFAULT_GUARDS: &[&str] = &["max_iter_reached"];

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Conditions that make an unbounded `repeat_until_success` acceptable.
    pub guards: BTreeSet<String>,
    /// Modalities known to the run configuration, when one is supplied.
    pub known_modalities: Option<BTreeSet<String>>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            guards: DEFAULT_GUARDS.iter().map(|s| s.to_string()).collect(),
            known_modalities: None,
        }
    }
}

impl ValidateOptions {
    pub fn with_modalities<I, S>(mut self, modalities: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.known_modalities = Some(modalities.into_iter().map(Into::into).collect());
        self
    }
}

fn span_of(node: &Node) -> SourceSpan {
    node.span.unwrap_or(SourceSpan::new(1, 1))
}

/// Static lints over a parsed tree. Structural problems (which the parser
/// already rejects for text input) are reported as errors; everything else is
/// a warning.
pub fn validate(tree: &TreeDef, opts: &ValidateOptions) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if let Err(e) = tree.check() {
        let code = match e {
            TreeError::Arity { .. } => DiagCode::ErrArity,
            TreeError::DuplicateId(_) => DiagCode::ErrSyntax,
            TreeError::UnresolvedSkill(_) => DiagCode::ErrUnresolvedSkill,
            TreeError::SkillCycle(_) => DiagCode::ErrSkillCycle,
        };
        diags.push(Diagnostic::error(
            code,
            SourceSpan::new(1, 1),
            e.to_string(),
        ));
        return diags;
    }

    let bodies = std::iter::once(&tree.root).chain(tree.skills.values());
    for body in bodies {
        body.walk(&mut |node| match &node.kind {
            NodeKind::Decorator(DecoratorKind::RepeatUntilSuccess { max_repeats: None }) => {
                if !has_guard(tree, node, &opts.guards) {
                    diags.push(Diagnostic::warning(
                        DiagCode::WarnUnguardedRepeat,
                        span_of(node),
                        format!(
                            "`repeat_until_success` without `max` has no guard condition ({}) in its subtree",
                            opts.guards.iter().cloned().collect::<Vec<_>>().join(", ")
                        ),
                    ));
                }
            }
            NodeKind::Fallback => {
                let forced = node
                    .children
                    .iter()
                    .position(|c| matches!(c.kind, NodeKind::Decorator(DecoratorKind::ForceSuccess)));
                if let Some(k) = forced {
                    for c in &node.children[k + 1..] {
                        diags.push(Diagnostic::warning(
                            DiagCode::WarnUnreachable,
                            span_of(c),
                            format!(
                                "`{}` is unreachable: an earlier `force_success` sibling always succeeds",
                                describe(c)
                            ),
                        ));
                    }
                }
            }
            NodeKind::Condition(c) => {
                if let (Some(known), Some(policy)) = (&opts.known_modalities, &c.policy) {
                    for m in policy.modalities() {
                        if !known.contains(m) {
                            diags.push(Diagnostic::warning(
                                DiagCode::WarnUnknownModality,
                                span_of(node),
                                format!("condition `{}` uses modality `{m}` missing from the run configuration", c.name),
                            ));
                        }
                    }
                }
            }
            _ => {}
        });
    }
    diags.sort_by_key(|d| d.span);
    diags
}

fn describe(node: &Node) -> String {
    match &node.kind {
        NodeKind::Action(a) => format!("action {}", a.name),
        NodeKind::Condition(c) => format!("condition {}", c.name),
        NodeKind::UseSkill(s) => format!("use_skill {s}"),
        k => k.label().to_string(),
    }
}

/// Looks for a guard condition below `node`, following skill references.
fn has_guard(tree: &TreeDef, node: &Node, guards: &BTreeSet<String>) -> bool {
    fn go(
        tree: &TreeDef,
        node: &Node,
        guards: &BTreeSet<String>,
        visited: &mut BTreeSet<String>,
    ) -> bool {
        match &node.kind {
            NodeKind::Condition(c) if guards.contains(&c.name) => return true,
            NodeKind::UseSkill(s)
                if visited.insert(s.clone())
                    && tree
                        .skills
                        .get(s)
                        .is_some_and(|body| go(tree, body, guards, visited)) =>
            {
                return true
            }
            _ => {}
        }
        node.children.iter().any(|c| go(tree, c, guards, visited))
    }
    go(tree, node, guards, &mut BTreeSet::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn lint(src: &str) -> Vec<Diagnostic> {
        validate(&parse(src).unwrap(), &ValidateOptions::default())
    }

    #[test]
    fn unguarded_repeat_warns() {
        let d = lint("tree t\n  repeat_until_success\n    action a\n");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagCode::WarnUnguardedRepeat);
        assert_eq!(d[0].span, SourceSpan::new(2, 3));
        assert!(!d[0].is_error());
    }

    #[test]
    fn bounded_or_guarded_repeat_is_fine() {
        assert!(lint("tree t\n  repeat_until_success max=4\n    action a\n").is_empty());
        assert!(lint(
            "tree t\n  repeat_until_success\n    fallback\n      condition max_iter_reached\n      action a\n"
        )
        .is_empty());
        // Guard inside a referenced skill.
        assert!(lint(
            "tree t\n  repeat_until_success\n    use_skill s\nskill s\n  fallback\n    condition max_iter_reached\n    action a\n"
        )
        .is_empty());
    }

    #[test]
    fn unreachable_after_force_success() {
        let d = lint("tree t\n  fallback\n    force_success\n      action a\n    action x\n");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagCode::WarnUnreachable);
        assert_eq!(d[0].span.line, 5);
        assert!(d[0].message.contains("action x"));
    }

    #[test]
    fn unknown_modalities() {
        let t =
            parse("tree t\n  condition c modalities=[vision,sonar] weights=[0.5,0.5]\n").unwrap();
        assert!(validate(&t, &ValidateOptions::default()).is_empty());
        let d = validate(
            &t,
            &ValidateOptions::default().with_modalities(["vision", "ft"]),
        );
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagCode::WarnUnknownModality);
        assert!(d[0].message.contains("sonar"));
    }

    #[test]
    fn programmatic_tree_errors() {
        let t = TreeDef::new("t", Node::use_skill("missing"));
        let d = validate(&t, &ValidateOptions::default());
        assert!(d[0].is_error());
        assert_eq!(d[0].code, DiagCode::ErrUnresolvedSkill);
    }
}
