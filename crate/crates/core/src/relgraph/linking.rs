//! Rule-based schema linking between question tokens and schema items.
//!
//! A token *matches* an item when its lemma equals one of the item's name
//! words (case-folded). The match is exact when the whole name also occurs
//! as a contiguous span of question lemmas, partial otherwise. Columns whose
//! cell values contain the token get a value match, but only when no name
//! match holds.

use serde::{Deserialize, Serialize};

use super::{Question, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchKind {
    NoMatch,
    PartialMatch,
    ExactMatch,
    ValueMatch,
}

/// Dense `(question token, schema item)` match table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaLinking {
    num_tokens: usize,
    num_tables: usize,
    num_columns: usize,
    table: Vec<MatchKind>,
    column: Vec<MatchKind>,
}

impl SchemaLinking {
    /// Wraps precomputed tables; row-major by question token.
    pub fn from_parts(
        num_tokens: usize,
        table: Vec<MatchKind>,
        column: Vec<MatchKind>,
    ) -> Option<SchemaLinking> {
        if num_tokens == 0 || !table.len().is_multiple_of(num_tokens) || !column.len().is_multiple_of(num_tokens) {
            return None;
        }
        Some(SchemaLinking {
            num_tokens,
            num_tables: table.len() / num_tokens,
            num_columns: column.len() / num_tokens,
            table,
            column,
        })
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    pub fn num_tables(&self) -> usize {
        self.num_tables
    }

    pub fn num_columns(&self) -> usize {
        self.num_columns
    }

    pub fn table(&self, token: usize, table: usize) -> MatchKind {
        self.table[token * self.num_tables + table]
    }

    pub fn column(&self, token: usize, column: usize) -> MatchKind {
        self.column[token * self.num_columns + column]
    }
}

fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// Match kind of every question token against one name.
fn name_matches(lemmas: &[String], name: &[String]) -> Vec<MatchKind> {
    let name: Vec<String> = name.iter().map(|w| fold(w)).collect();
    let exact = !name.is_empty()
        && lemmas.len() >= name.len()
        && lemmas.windows(name.len()).any(|w| w == name.as_slice());
    lemmas
        .iter()
        .map(|lemma| {
            if !name.contains(lemma) {
                MatchKind::NoMatch
            } else if exact {
                MatchKind::ExactMatch
            } else {
                MatchKind::PartialMatch
            }
        })
        .collect()
}

/// Tokens of a cell value: maximal alphanumeric runs, case-folded.
pub fn value_tokens(value: &str) -> impl Iterator<Item = String> + '_ {
    value
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(fold)
}

pub fn link_schema(question: &Question, schema: &Schema) -> SchemaLinking {
    let lemmas: Vec<String> = question.lemmas().iter().map(|l| fold(l)).collect();
    let n = lemmas.len();

    let per_table: Vec<Vec<MatchKind>> = schema
        .tables
        .iter()
        .map(|t| name_matches(&lemmas, &t.name_words))
        .collect();
    let per_column: Vec<Vec<MatchKind>> = schema
        .columns
        .iter()
        .map(|c| {
            let mut kinds = name_matches(&lemmas, &c.name_words);
            if let Some(values) = &c.cell_values {
                for (kind, lemma) in kinds.iter_mut().zip(&lemmas) {
                    if *kind == MatchKind::NoMatch
                        && values.iter().any(|v| value_tokens(v).any(|t| &t == lemma))
                    {
                        *kind = MatchKind::ValueMatch;
                    }
                }
            }
            kinds
        })
        .collect();

    let mut table = Vec::with_capacity(n * schema.tables.len());
    let mut column = Vec::with_capacity(n * schema.columns.len());
    for q in 0..n {
        table.extend(per_table.iter().map(|k| k[q]));
        column.extend(per_column.iter().map(|k| k[q]));
    }
    SchemaLinking {
        num_tokens: n,
        num_tables: schema.tables.len(),
        num_columns: schema.columns.len(),
        table,
        column,
    }
}
