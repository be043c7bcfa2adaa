//! Indentation-structured text format for trees, skills and fusion policies.
//!
//! ```text
//! tree insertion
//!   sequence
//!     use_skill grasp_rack
//!     use_skill align_rack
//!
//! skill align_rack
//!   sequence
//!     action move_to_preinsert
//!     condition rack_aligned modalities=[vision,depth] weights=[0.55,0.45] lambda=0.5
//! ```
//!
//! Indentation is exactly two spaces per level. `#` starts a comment.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bt::SourceSpan;

mod lexer;
mod parser;
mod serialize;
mod validate;

pub use parser::parse;
pub use serialize::{format_number, serialize};
pub use validate::{validate, ValidateOptions, DEFAULT_GUARDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// Machine-readable diagnostic category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagCode {
    /// Tab character or indentation that is not a multiple of two spaces.
    ErrIndent,
    ErrUnknownKeyword,
    /// Composite without children, decorator without exactly one child, or a
    /// leaf with children.
    ErrArity,
    /// Modality/weight length mismatch or weights not summing to one.
    ErrWeights,
    ErrUnresolvedSkill,
    ErrSkillCycle,
    /// Malformed tokens, missing names, bad argument values, duplicates.
    ErrSyntax,
    /// `repeat_until_success` with no bound and no guard condition.
    WarnUnguardedRepeat,
    WarnUnreachable,
    WarnUnknownModality,
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(code: DiagCode, span: SourceSpan, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn warning(code: DiagCode, span: SourceSpan, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}[{}]: {}", self.span, self.code, self.message)
    }
}
