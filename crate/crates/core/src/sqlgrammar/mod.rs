//! A SQL subset, its constructor grammar, and the transducers between SQL
//! text, syntax trees and depth-first action sequences.

mod actions;
mod ast;
mod coverage;
mod grammar;
mod lexer;
mod parser;
mod render;

pub use actions::{actions_to_ast, ast_to_actions, Action, ActionParseError};
pub use ast::{
    Agg, ArithOp, CmpOp, ColUnit, Cond, Conj, From, Group, Join, Operand, Order, Pred, SetOp, Sql,
    Tree, Unit, ValUnit, VALUE_PLACEHOLDER,
};
pub use coverage::{
    constructor_usage, grammar_coverage, parse_corpus, CorpusEntry, CoverageFailure, CoverageReport,
    FailureCategory,
};
pub use grammar::{ArityLimits, Constructor, Field, FieldKind, GrammarSpec, TypeDef};
pub use lexer::Span;
pub use parser::{parse_sql, parse_sql_with_limits};
pub use render::render_sql;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("unsupported syntax at {span}: {message}")]
    UnsupportedSyntax { message: String, span: Span },
    #[error("unknown identifier `{name}` at {span}")]
    UnknownIdentifier { name: String, span: Span },
    #[error("ambiguous identifier `{name}` at {span}")]
    Ambiguous { name: String, span: Span },
    #[error("{clause} has {count} items, limit is {limit}")]
    ArityOverflow {
        clause: &'static str,
        count: usize,
        limit: usize,
    },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("action {index}: expected {expected}, found {found}")]
    FrontierMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("action {index}: {reference} is out of range for this schema")]
    InvalidReference { index: usize, reference: String },
    #[error("action sequence ends before the tree is complete")]
    IncompleteSequence,
    #[error("tree is complete at action {index} but more actions follow")]
    TrailingActions { index: usize },
}

impl SqlError {
    pub fn unsupported(message: impl Into<String>, span: Span) -> SqlError {
        SqlError::UnsupportedSyntax {
            message: message.into(),
            span,
        }
    }
}
