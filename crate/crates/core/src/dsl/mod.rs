//! Textual rule-base and case-file formats.
//!
//! Rule bases are a sequence of `.`-terminated statements:
//!
//! ```text
//! # comments run to end of line
//! base respiratory.
//! attr fever.
//! attr cough.
//! attr sneeze.
//! hypo flu.
//! rule r1: IF fever AND (cough OR sneeze) THEN flu (0.8).
//! ```
//!
//! `base` (the rule-base name) and `concept` (an explicitly declared
//! intermediate) are optional. Case files carry one record per line:
//!
//! ```text
//! case c1: fever=0.9, cough=0.4 => flu=0.72 label=flu
//! ```

mod cases;
mod lexer;
mod parser;
mod writer;

use thiserror::Error;

pub use cases::{parse_cases, serialize_cases, CaseInstance};
pub use parser::{parse_rulebase, parse_rulebase_with};
pub use writer::serialize_rulebase;

/// Words that cannot be used as names.
pub const KEYWORDS: &[&str] = &["attr", "hypo", "rule", "base", "concept", "case", "label", "IF", "AND", "OR", "THEN"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("rule {rule}: undeclared name `{name}`")]
    UndeclaredName { rule: String, name: String },
    #[error("cycle in rule graph: {}", path.join(" -> "))]
    Cycle { path: Vec<String> },
    #[error("duplicate rule id `{id}`")]
    DuplicateRuleId { id: String },
    #[error("`{name}` is declared more than once")]
    DuplicateDeclaration { name: String },
    #[error("rule {rule}: strength {value} outside [-1, 1]")]
    StrengthOutOfRange { rule: String, value: f64 },
    #[error("rule {rule}: conclusion `{name}` is a data attribute")]
    ConclusionIsAttribute { rule: String, name: String },
    #[error("rule {rule}: final hypothesis `{name}` used in a premise")]
    HypothesisInPremise { rule: String, name: String },
    #[error("rule {rule}: atom `{atom}` repeated within one clause")]
    DuplicateAtom { rule: String, atom: String },
    #[error("rule {rule}: empty premise or clause")]
    EmptyPremise { rule: String },
    #[error("line {line}: unknown name `{name}`")]
    UnknownName { line: usize, name: String },
    #[error("line {line}: belief {value} for `{name}` outside [-1, 1]")]
    BeliefOutOfRange { line: usize, name: String, value: f64 },
    #[error("line {line}: duplicate case id `{id}`")]
    DuplicateCaseId { line: usize, id: String },
}
