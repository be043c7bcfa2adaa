//! Splits source text into indented lines of tokens.

use crate::bt::SourceSpan;

use super::{DiagCode, Diagnostic};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Number(f64),
    Eq,
    LBracket,
    RBracket,
    Comma,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Number(x) => format!("number {x}"),
            Tok::Eq => "`=`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub(crate) struct Line {
    pub level: usize,
    pub number: usize,
    pub tokens: Vec<Token>,
}

impl Line {
    pub(crate) fn span(&self) -> SourceSpan {
        self.tokens
            .first()
            .map_or(SourceSpan::new(self.number, 1), |t| t.span)
    }
}

/// Tokenizes every non-blank line. Lines with lexical errors are dropped and
/// reported; the remaining lines are still returned so parsing can continue.
pub(crate) fn lex(text: &str) -> (Vec<Line>, Vec<Diagnostic>) {
    let mut lines = Vec::new();
    let mut diags = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let number = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let indent = content
            .chars()
            .take_while(|c| *c == ' ' || *c == '\t')
            .collect::<Vec<_>>();
        if let Some(p) = indent.iter().position(|c| *c == '\t') {
            diags.push(Diagnostic::error(
                DiagCode::ErrIndent,
                SourceSpan::new(number, p + 1),
                "tab in indentation; use two spaces per level",
            ));
            continue;
        }
        if indent.len() % 2 != 0 {
            diags.push(Diagnostic::error(
                DiagCode::ErrIndent,
                SourceSpan::new(number, indent.len() + 1),
                format!(
                    "indentation of {} spaces is not a multiple of two",
                    indent.len()
                ),
            ));
            continue;
        }
        match tokenize(content, number) {
            Ok(tokens) => lines.push(Line {
                level: indent.len() / 2,
                number,
                tokens,
            }),
            Err(d) => diags.push(d),
        }
    }
    (lines, diags)
}

fn tokenize(content: &str, line: usize) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = content.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = SourceSpan::new(line, i + 1);
        let single = match c {
            '=' => Some(Tok::Eq),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, span });
            i += 1;
        } else if c == ' ' || c == '\t' {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                span,
            });
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(Token {
                    tok: Tok::Number(x),
                    span,
                }),
                _ => {
                    return Err(Diagnostic::error(
                        DiagCode::ErrSyntax,
                        span,
                        format!("malformed number `{text}`"),
                    ))
                }
            }
        } else {
            return Err(Diagnostic::error(
                DiagCode::ErrSyntax,
                span,
                format!("unexpected character `{}`", c.escape_debug()),
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_levels() {
        let (lines, diags) = lex("tree t\r\n  action a duration=2.5 # note\n\n    x=[a,b]\n");
        assert!(diags.is_empty());
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].level, 1);
        assert_eq!(lines[1].tokens[4].tok, Tok::Number(2.5));
        assert_eq!(lines[2].level, 2);
        assert_eq!(lines[2].tokens.len(), 7);
    }

    #[test]
    fn indentation_errors() {
        let (_, d) = lex("tree t\n\taction a\n   action b\n");
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|d| d.code == DiagCode::ErrIndent));
        assert_eq!(d[0].span, SourceSpan::new(2, 1));
        assert_eq!(d[1].span, SourceSpan::new(3, 4));
    }

    #[test]
    fn bad_characters_and_numbers() {
        let (_, d) = lex("tree t!\n  action a x=1e999\n  action b x=1..2\n");
        assert_eq!(d.len(), 3);
        assert_eq!(d[0].span, SourceSpan::new(1, 7));
    }
}
