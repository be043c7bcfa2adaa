use std::collections::BTreeMap;

use indexmap::IndexMap;

use crate::bt::{
    ActionSpec, ArgValue, ConditionSpec, DecoratorKind, Node, NodeKind, SourceSpan, TreeDef,
    TreeError,
};
use crate::fusion::{FusionError, FusionPolicy, DEFAULT_THRESHOLD};

use super::lexer::{lex, Line, Tok, Token};
use super::{DiagCode, Diagnostic};

/// Parses a `.bt` document holding exactly one `tree` and any number of
/// `skill` definitions.
///
/// Never panics: any input yields either a tree or at least one error
/// diagnostic. Warnings are not produced here; see [`super::validate`].
pub fn parse(text: &str) -> Result<TreeDef, Vec<Diagnostic>> {
    let (lines, mut diags) = lex(text);
    let mut p = Parser {
        lines: &lines,
        pos: 0,
        diags: Vec::new(),
    };
    let doc = p.document();
    diags.append(&mut p.diags);
    if diags.is_empty() {
        diags.extend(resolve(&doc));
    }
    diags.sort_by_key(|d| d.span);
    let first_span = lines.first().map_or(SourceSpan::new(1, 1), Line::span);
    match doc {
        Document {
            tree: Some(tree), ..
        } if diags.is_empty() => Ok(tree),
        Document {
            tree: None, skills, ..
        } if diags.is_empty() => Err(vec![Diagnostic::error(
            DiagCode::ErrSyntax,
            if skills.is_empty() {
                SourceSpan::new(1, 1)
            } else {
                first_span
            },
            if skills.is_empty() {
                "expected tree or skill"
            } else {
                "expected a `tree` definition"
            },
        )]),
        _ => Err(diags),
    }
}

struct Document {
    tree: Option<TreeDef>,
    skills: IndexMap<String, Node>,
}

struct Parser<'a> {
    lines: &'a [Line],
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl Parser<'_> {
    fn error(&mut self, code: DiagCode, span: SourceSpan, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }

    fn document(&mut self) -> Document {
        let mut tree: Option<(String, Node, SourceSpan)> = None;
        let mut skills = IndexMap::new();
        while self.pos < self.lines.len() {
            let lines = self.lines;
            let line = &lines[self.pos];
            if line.level != 0 {
                self.error(
                    DiagCode::ErrIndent,
                    line.span(),
                    "unexpected indentation at top level",
                );
                self.skip_block(0);
                continue;
            }
            let head = match &line.tokens[0].tok {
                Tok::Word(w) if w == "tree" || w == "skill" => w.clone(),
                other => {
                    let code = match other {
                        Tok::Word(_) => DiagCode::ErrUnknownKeyword,
                        _ => DiagCode::ErrSyntax,
                    };
                    self.error(
                        code,
                        line.span(),
                        format!("expected tree or skill, found {}", other.describe()),
                    );
                    self.pos += 1;
                    self.skip_block(0);
                    continue;
                }
            };
            let span = line.span();
            let name = self.single_name(line, &head);
            self.pos += 1;
            let body = self.single_child(0, span, &head);
            let (Some(name), Some(body)) = (name, body) else {
                continue;
            };
            if head == "tree" {
                if tree.is_some() {
                    self.error(
                        DiagCode::ErrSyntax,
                        span,
                        "only one tree per file is supported",
                    );
                } else {
                    tree = Some((name, body, span));
                }
            } else if skills.contains_key(&name) {
                self.error(
                    DiagCode::ErrSyntax,
                    span,
                    format!("duplicate skill `{name}`"),
                );
            } else {
                skills.insert(name, body);
            }
        }
        let tree = tree.map(|(name, root, _)| {
            let mut t = TreeDef {
                name,
                root,
                skills: skills.clone(),
            };
            t.renumber();
            t
        });
        Document { tree, skills }
    }

    /// `tree NAME` / `skill NAME` / `use_skill NAME` header: exactly one word after the keyword.
    fn single_name(&mut self, line: &Line, what: &str) -> Option<String> {
        match &line.tokens[1..] {
            [Token {
                tok: Tok::Word(w), ..
            }] => Some(w.clone()),
            [] => {
                self.error(
                    DiagCode::ErrSyntax,
                    line.span(),
                    format!("`{what}` needs a name"),
                );
                None
            }
            [Token {
                tok: Tok::Word(_), ..
            }, extra, ..] => {
                self.error(
                    DiagCode::ErrSyntax,
                    extra.span,
                    format!("unexpected {} after `{what}` name", extra.tok.describe()),
                );
                None
            }
            [t, ..] => {
                self.error(
                    DiagCode::ErrSyntax,
                    t.span,
                    format!("expected a name after `{what}`, found {}", t.tok.describe()),
                );
                None
            }
        }
    }

    /// Parses the children block of a header or decorator at `level` and
    /// requires exactly one node.
    fn single_child(&mut self, level: usize, span: SourceSpan, what: &str) -> Option<Node> {
        let children = self.children(level)?;
        if children.len() != 1 {
            self.error(
                DiagCode::ErrArity,
                span,
                format!(
                    "`{what}` takes exactly one child node, found {}",
                    children.len()
                ),
            );
            return None;
        }
        children.into_iter().next()
    }

    /// Parses all nodes at `level + 1` directly following the current line.
    /// Returns `None` if any of them failed to parse.
    fn children(&mut self, level: usize) -> Option<Vec<Node>> {
        let mut out = Vec::new();
        let mut ok = true;
        let lines = self.lines;
        while let Some(line) = lines.get(self.pos) {
            if line.level <= level {
                break;
            }
            if line.level > level + 1 {
                self.error(
                    DiagCode::ErrIndent,
                    line.span(),
                    "indentation jumps more than one level",
                );
                self.skip_block(level + 1);
                ok = false;
                continue;
            }
            match self.node() {
                Some(n) => out.push(n),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    /// Skips lines nested deeper than `level`.
    fn skip_block(&mut self, level: usize) {
        while self.lines.get(self.pos).is_some_and(|l| l.level > level) {
            self.pos += 1;
        }
    }

    fn node(&mut self) -> Option<Node> {
        let lines = self.lines;
        let line = &lines[self.pos];
        let level = line.level;
        let span = line.span();
        self.pos += 1;
        let keyword = match &line.tokens[0].tok {
            Tok::Word(w) => w.as_str(),
            other => {
                self.error(
                    DiagCode::ErrSyntax,
                    span,
                    format!("expected a node keyword, found {}", other.describe()),
                );
                self.skip_block(level);
                return None;
            }
        };
        let kind = match keyword {
            "sequence"
            | "fallback"
            | "parallel"
            | "inverter"
            | "force_success"
            | "repeat_until_success" => self.composite_kind(line, keyword),
            "action" => self.action(line),
            "condition" => self.condition(line),
            "use_skill" => self.single_name(line, "use_skill").map(NodeKind::UseSkill),
            "tree" | "skill" => {
                self.error(
                    DiagCode::ErrSyntax,
                    span,
                    format!("`{keyword}` is only allowed at top level"),
                );
                None
            }
            other => {
                self.error(
                    DiagCode::ErrUnknownKeyword,
                    span,
                    format!("unknown keyword `{other}`"),
                );
                None
            }
        };
        let Some(kind) = kind else {
            self.skip_block(level);
            return None;
        };
        let children = self.children(level)?;
        let arity_ok = match &kind {
            NodeKind::Sequence | NodeKind::Fallback | NodeKind::Parallel => !children.is_empty(),
            NodeKind::Decorator(_) => children.len() == 1,
            _ => children.is_empty(),
        };
        if !arity_ok {
            let expect = match &kind {
                NodeKind::Sequence | NodeKind::Fallback | NodeKind::Parallel => {
                    "at least one child"
                }
                NodeKind::Decorator(_) => "exactly one child",
                _ => "no children",
            };
            self.error(
                DiagCode::ErrArity,
                span,
                format!("`{keyword}` takes {expect}, found {}", children.len()),
            );
            return None;
        }
        let mut node = Node::new(kind, children);
        node.span = Some(span);
        Some(node)
    }

    fn composite_kind(&mut self, line: &Line, keyword: &str) -> Option<NodeKind> {
        let args = self.kvargs(line, 1)?;
        let mut max_repeats = None;
        for (key, (value, span)) in args {
            match (keyword, key.as_str(), value) {
                ("repeat_until_success", "max", Value::Num(x)) => {
                    if x.fract() != 0.0 || x < 1.0 || x > u32::MAX as f64 {
                        self.error(
                            DiagCode::ErrSyntax,
                            span,
                            format!("max must be a positive integer, found {x}"),
                        );
                        return None;
                    }
                    max_repeats = Some(x as u32);
                }
                _ => {
                    self.error(
                        DiagCode::ErrSyntax,
                        span,
                        format!("unexpected argument `{key}` for `{keyword}`"),
                    );
                    return None;
                }
            }
        }
        Some(match keyword {
            "sequence" => NodeKind::Sequence,
            "fallback" => NodeKind::Fallback,
            "parallel" => NodeKind::Parallel,
            "inverter" => NodeKind::Decorator(DecoratorKind::Inverter),
            "force_success" => NodeKind::Decorator(DecoratorKind::ForceSuccess),
            _ => NodeKind::Decorator(DecoratorKind::RepeatUntilSuccess { max_repeats }),
        })
    }

    fn leaf_name(&mut self, line: &Line, what: &str) -> Option<String> {
        match line.tokens.get(1) {
            Some(Token {
                tok: Tok::Word(w),
                span,
            }) => {
                if line.tokens.get(2).is_some_and(|t| t.tok == Tok::Eq) {
                    self.error(
                        DiagCode::ErrSyntax,
                        *span,
                        format!("`{what}` needs a name before its arguments"),
                    );
                    None
                } else {
                    Some(w.clone())
                }
            }
            Some(t) => {
                self.error(
                    DiagCode::ErrSyntax,
                    t.span,
                    format!("expected a name after `{what}`, found {}", t.tok.describe()),
                );
                None
            }
            None => {
                self.error(
                    DiagCode::ErrSyntax,
                    line.span(),
                    format!("`{what}` needs a name"),
                );
                None
            }
        }
    }

    fn action(&mut self, line: &Line) -> Option<NodeKind> {
        let name = self.leaf_name(line, "action")?;
        let mut spec = ActionSpec::new(name);
        for (key, (value, span)) in self.kvargs(line, 2)? {
            let v = match value {
                Value::Num(x) => ArgValue::Number(x),
                Value::Word(w) => ArgValue::Text(w),
                Value::List(..) => {
                    self.error(
                        DiagCode::ErrSyntax,
                        span,
                        "action arguments cannot be lists",
                    );
                    return None;
                }
            };
            spec.args.insert(key, v);
        }
        Some(NodeKind::Action(spec))
    }

    fn condition(&mut self, line: &Line) -> Option<NodeKind> {
        let name = self.leaf_name(line, "condition")?;
        let mut args = self.kvargs(line, 2)?;
        let modalities = args.remove("modalities");
        let weights = args.remove("weights");
        let lambda = args.remove("lambda");
        if let Some((key, (_, span))) = args.into_iter().next() {
            self.error(
                DiagCode::ErrSyntax,
                span,
                format!("unexpected argument `{key}` for `condition`"),
            );
            return None;
        }
        let (modalities, weights) = match (modalities, weights) {
            (None, None) => {
                if let Some((_, span)) = lambda {
                    self.error(
                        DiagCode::ErrSyntax,
                        span,
                        "`lambda` requires `modalities` and `weights`",
                    );
                    return None;
                }
                return Some(NodeKind::Condition(ConditionSpec::deterministic(name)));
            }
            (Some((_, span)), None) | (None, Some((_, span))) => {
                self.error(
                    DiagCode::ErrWeights,
                    span,
                    "`modalities` and `weights` must be given together",
                );
                return None;
            }
            (Some(m), Some(w)) => (m, w),
        };
        let names = match modalities.0 {
            Value::List(items) if items.iter().all(|v| matches!(v, Value::Word(_))) => items
                .into_iter()
                .map(|v| match v {
                    Value::Word(w) => w,
                    _ => unreachable!(),
                })
                .collect::<Vec<_>>(),
            _ => {
                self.error(
                    DiagCode::ErrSyntax,
                    modalities.1,
                    "`modalities` must be a list of names",
                );
                return None;
            }
        };
        let nums = match weights.0 {
            Value::List(items) if items.iter().all(|v| matches!(v, Value::Num(_))) => items
                .into_iter()
                .map(|v| match v {
                    Value::Num(x) => x,
                    _ => unreachable!(),
                })
                .collect::<Vec<_>>(),
            _ => {
                self.error(
                    DiagCode::ErrSyntax,
                    weights.1,
                    "`weights` must be a list of numbers",
                );
                return None;
            }
        };
        let threshold = match lambda {
            None => DEFAULT_THRESHOLD,
            Some((Value::Num(x), _)) => x,
            Some((_, span)) => {
                self.error(DiagCode::ErrSyntax, span, "`lambda` must be a number");
                return None;
            }
        };
        match FusionPolicy::new(names, nums, threshold) {
            Ok(policy) => Some(NodeKind::Condition(ConditionSpec::fused(name, policy))),
            Err(e) => {
                let (code, span) = match e {
                    FusionError::InvalidThreshold(_) => {
                        (DiagCode::ErrSyntax, lambda.map_or(weights.1, |l| l.1))
                    }
                    FusionError::ModalityMismatch(_) => (DiagCode::ErrSyntax, modalities.1),
                    _ => (DiagCode::ErrWeights, weights.1),
                };
                self.error(code, span, e.to_string());
                None
            }
        }
    }

    /// Parses `key=value` pairs starting at token `from`. Keys must be unique.
    fn kvargs(
        &mut self,
        line: &Line,
        from: usize,
    ) -> Option<BTreeMap<String, (Value, SourceSpan)>> {
        let toks = &line.tokens;
        let mut out = BTreeMap::new();
        let mut i = from;
        while i < toks.len() {
            let (key, key_span) = match &toks[i].tok {
                Tok::Word(w) => (w.clone(), toks[i].span),
                other => {
                    self.error(
                        DiagCode::ErrSyntax,
                        toks[i].span,
                        format!("expected `key=value`, found {}", other.describe()),
                    );
                    return None;
                }
            };
            if toks.get(i + 1).map(|t| &t.tok) != Some(&Tok::Eq) {
                self.error(
                    DiagCode::ErrSyntax,
                    key_span,
                    format!("expected `=` after `{key}`"),
                );
                return None;
            }
            i += 2;
            let value = match toks.get(i).map(|t| &t.tok) {
                Some(Tok::Number(x)) => {
                    i += 1;
                    Value::Num(*x)
                }
                Some(Tok::Word(w)) => {
                    i += 1;
                    Value::Word(w.clone())
                }
                Some(Tok::LBracket) => {
                    i += 1;
                    let mut items = Vec::new();
                    loop {
                        match toks.get(i).map(|t| &t.tok) {
                            Some(Tok::RBracket) if items.is_empty() => {
                                i += 1;
                                break;
                            }
                            Some(Tok::Number(x)) => items.push(Value::Num(*x)),
                            Some(Tok::Word(w)) => items.push(Value::Word(w.clone())),
                            _ => {
                                self.error(
                                    DiagCode::ErrSyntax,
                                    key_span,
                                    format!("malformed list for `{key}`"),
                                );
                                return None;
                            }
                        }
                        i += 1;
                        match toks.get(i).map(|t| &t.tok) {
                            Some(Tok::Comma) => i += 1,
                            Some(Tok::RBracket) => {
                                i += 1;
                                break;
                            }
                            _ => {
                                self.error(
                                    DiagCode::ErrSyntax,
                                    key_span,
                                    format!("unterminated list for `{key}`"),
                                );
                                return None;
                            }
                        }
                    }
                    Value::List(items)
                }
                _ => {
                    self.error(
                        DiagCode::ErrSyntax,
                        key_span,
                        format!("missing value for `{key}`"),
                    );
                    return None;
                }
            };
            if out.insert(key.clone(), (value, key_span)).is_some() {
                self.error(
                    DiagCode::ErrSyntax,
                    key_span,
                    format!("duplicate argument `{key}`"),
                );
                return None;
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone)]
enum Value {
    Num(f64),
    Word(String),
    List(Vec<Value>),
}

/// Skill resolution diagnostics, reported at the offending `use_skill` line.
fn resolve(doc: &Document) -> Vec<Diagnostic> {
    let Some(tree) = &doc.tree else {
        return Vec::new();
    };
    let mut diags = Vec::new();
    let bodies = std::iter::once(&tree.root).chain(tree.skills.values());
    for body in bodies {
        body.walk(&mut |n| {
            if let NodeKind::UseSkill(s) = &n.kind {
                if !tree.skills.contains_key(s) {
                    diags.push(Diagnostic::error(
                        DiagCode::ErrUnresolvedSkill,
                        n.span.unwrap_or(SourceSpan::new(1, 1)),
                        format!("unknown skill `{s}`"),
                    ));
                }
            }
        });
    }
    if !diags.is_empty() {
        return diags;
    }
    if let Err(TreeError::SkillCycle(cycle)) = tree.check() {
        // Point at the use site that closes the cycle.
        let (from, to) = (&cycle[cycle.len() - 2], &cycle[cycle.len() - 1]);
        let mut span = SourceSpan::new(1, 1);
        tree.skills[from.as_str()].walk(&mut |n| {
            if matches!(&n.kind, NodeKind::UseSkill(s) if s == to) {
                span = n.span.unwrap_or(span);
            }
        });
        diags.push(Diagnostic::error(
            DiagCode::ErrSkillCycle,
            span,
            format!("skill cycle: {}", cycle.join(" -> ")),
        ));
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errs(text: &str) -> Vec<Diagnostic> {
        parse(text).expect_err("expected parse failure")
    }

    fn codes(text: &str) -> Vec<DiagCode> {
        errs(text).into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn minimal_tree() {
        let t = parse("tree t\n  sequence\n    action a duration=2\n    condition c\n").unwrap();
        assert_eq!(t.name, "t");
        assert_eq!(t.root.children.len(), 2);
        match &t.root.children[0].kind {
            NodeKind::Action(a) => assert_eq!(a.number_arg("duration"), Some(2.0)),
            k => panic!("{k:?}"),
        }
        assert_eq!(t.root.children[1].span, Some(SourceSpan::new(4, 5)));
    }

    #[test]
    fn fused_condition_defaults_lambda() {
        let t =
            parse("tree t\n  condition ok modalities=[vision, ft] weights=[0.6, 0.4]\n").unwrap();
        match &t.root.kind {
            NodeKind::Condition(c) => {
                let p = c.policy.as_ref().unwrap();
                assert_eq!(p.threshold(), 0.5);
                assert_eq!(p.modalities(), ["vision", "ft"]);
            }
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn empty_file() {
        let d = errs("");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].message, "expected tree or skill");
        let d = errs("# only a comment\n\n");
        assert_eq!(d[0].message, "expected tree or skill");
    }

    #[test]
    fn weights_must_sum_to_one() {
        let d = errs("tree t\n  condition aligned modalities=[vision,depth] weights=[0.6,0.5]\n");
        assert_eq!(d[0].code, DiagCode::ErrWeights);
        assert_eq!(d[0].span.line, 2);
        assert_eq!(
            codes("tree t\n  condition a modalities=[x,y] weights=[1.0]\n"),
            [DiagCode::ErrWeights]
        );
        assert_eq!(
            codes("tree t\n  condition a modalities=[x]\n"),
            [DiagCode::ErrWeights]
        );
    }

    #[test]
    fn arity_errors() {
        assert_eq!(codes("tree t\n  sequence\n"), [DiagCode::ErrArity]);
        assert_eq!(
            codes("tree t\n  inverter\n    action a\n    action b\n"),
            [DiagCode::ErrArity]
        );
        assert_eq!(
            codes("tree t\n  action a\n    action b\n"),
            [DiagCode::ErrArity]
        );
        assert_eq!(
            codes("tree t\n  action a\n  action b\n"),
            [DiagCode::ErrArity]
        );
    }

    #[test]
    fn keyword_and_indent_errors() {
        assert_eq!(
            codes("tree t\n  sequense\n    action a\n"),
            [DiagCode::ErrUnknownKeyword]
        );
        assert_eq!(
            codes("tree t\n\tsequence\n  action a\n"),
            [DiagCode::ErrIndent]
        );
        assert_eq!(codes("tree t\n      action a\n"), [DiagCode::ErrIndent]);
        assert_eq!(
            codes("tree t\n   action a\n  action b\n"),
            [DiagCode::ErrIndent]
        );
        assert_eq!(
            codes("forest t\n  action a\n"),
            [DiagCode::ErrUnknownKeyword]
        );
    }

    #[test]
    fn skill_resolution() {
        let d = errs("tree t\n  use_skill nope\n");
        assert_eq!(d[0].code, DiagCode::ErrUnresolvedSkill);
        assert_eq!(d[0].span, SourceSpan::new(2, 3));

        let d = errs(
            "tree t\n  use_skill a\nskill a\n  use_skill b\nskill b\n  sequence\n    use_skill a\n",
        );
        assert_eq!(d[0].code, DiagCode::ErrSkillCycle);
        assert_eq!(d[0].span.line, 7);
    }

    #[test]
    fn repeat_max_must_be_positive_integer() {
        assert!(parse("tree t\n  repeat_until_success max=3\n    action a\n").is_ok());
        assert_eq!(
            codes("tree t\n  repeat_until_success max=0\n    action a\n"),
            [DiagCode::ErrSyntax]
        );
        assert_eq!(
            codes("tree t\n  repeat_until_success max=2.5\n    action a\n"),
            [DiagCode::ErrSyntax]
        );
        assert_eq!(
            codes("tree t\n  sequence max=2\n    action a\n"),
            [DiagCode::ErrSyntax]
        );
    }

    #[test]
    fn multiple_errors_are_collected() {
        let d = errs("tree t\n  sequence\n    bogus\n    action\n    action ok x=\n");
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn only_one_tree_and_unique_skills() {
        assert_eq!(
            codes("tree a\n  action x\ntree b\n  action y\n"),
            [DiagCode::ErrSyntax]
        );
        assert_eq!(
            codes("tree a\n  action x\nskill s\n  action y\nskill s\n  action z\n"),
            [DiagCode::ErrSyntax]
        );
        assert_eq!(
            errs("skill s\n  action y\n")[0].message,
            "expected a `tree` definition"
        );
    }
}
