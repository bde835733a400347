//! Corpus-level round-trip measurement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::relgraph::Schema;

use super::actions::{actions_to_ast, ast_to_actions};
use super::ast::Sql;
use super::grammar::GrammarSpec;
use super::parser::parse_sql_with_limits;
use super::render::render_sql;
use super::SqlError;

/// One line of a corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub db_id: String,
    pub sql: String,
}

/// Parses JSON lines, skipping blank ones. Errors carry the 1-based line.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusEntry>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    UnsupportedSyntax,
    ArityOverflow,
    Identifier,
    RoundTrip,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageFailure {
    pub index: usize,
    pub db_id: String,
    pub category: FailureCategory,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total: usize,
    pub covered: usize,
    /// `covered / total`, or 1 for an empty corpus.
    pub fraction: f64,
    /// Mean action-sequence length over covered queries.
    pub mean_actions: f64,
    pub failures: Vec<CoverageFailure>,
}

fn categorize(e: &SqlError) -> FailureCategory {
    match e {
        SqlError::UnsupportedSyntax { .. } => FailureCategory::UnsupportedSyntax,
        SqlError::ArityOverflow { .. } => FailureCategory::ArityOverflow,
        SqlError::UnknownIdentifier { .. } | SqlError::Ambiguous { .. } => FailureCategory::Identifier,
        _ => FailureCategory::RoundTrip,
    }
}

/// Checks one query: parse, render fixed point, and action replay.
/// Returns the parsed tree and its action count.
fn check(sql: &str, schema: &Schema, grammar: &GrammarSpec) -> Result<(Sql, usize), (FailureCategory, String)> {
    let fail = |e: SqlError| (categorize(&e), e.to_string());
    let ast = parse_sql_with_limits(sql, schema, &grammar.limits).map_err(fail)?;
    let text = render_sql(&ast, schema);
    let again = parse_sql_with_limits(&text, schema, &grammar.limits).map_err(fail)?;
    if again != ast || render_sql(&again, schema) != text {
        return Err((FailureCategory::RoundTrip, format!("render is not a fixed point: {text}")));
    }
    let actions = ast_to_actions(&ast);
    let replayed = actions_to_ast(&actions, grammar, schema).map_err(|e| (FailureCategory::RoundTrip, e.to_string()))?;
    if replayed != ast.masked() {
        return Err((FailureCategory::RoundTrip, "action replay changed the tree".into()));
    }
    Ok((ast, actions.len()))
}

pub fn grammar_coverage(
    corpus: &[CorpusEntry],
    schemas: &BTreeMap<String, Schema>,
    grammar: &GrammarSpec,
) -> CoverageReport {
    let mut failures = Vec::new();
    let mut action_total = 0;
    for (index, entry) in corpus.iter().enumerate() {
        let outcome = match schemas.get(&entry.db_id) {
            None => Err((FailureCategory::Identifier, format!("unknown database `{}`", entry.db_id))),
            Some(schema) => check(&entry.sql, schema, grammar),
        };
        match outcome {
            Ok((_, n)) => action_total += n,
            Err((category, message)) => failures.push(CoverageFailure {
                index,
                db_id: entry.db_id.clone(),
                category,
                message,
            }),
        }
    }
    let total = corpus.len();
    let covered = total - failures.len();
    CoverageReport {
        total,
        covered,
        fraction: if total == 0 { 1.0 } else { covered as f64 / total as f64 },
        mean_actions: if covered == 0 { 0.0 } else { action_total as f64 / covered as f64 },
        failures,
    }
}

/// How often each constructor occurs across the given trees.
pub fn constructor_usage<'a>(asts: impl IntoIterator<Item = &'a Sql>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for ast in asts {
        for c in ast.to_tree().constructors() {
            *counts.entry(c.to_string()).or_insert(0) += 1;
        }
    }
    counts
}
