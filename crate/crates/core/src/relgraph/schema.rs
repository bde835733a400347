use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::RelGraphError;

/// A tokenized question with precomputed lemmas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    raw_tokens: Vec<String>,
    lemmas: Vec<String>,
}

impl Question {
    pub fn new(raw_tokens: Vec<String>, lemmas: Vec<String>) -> Result<Self, RelGraphError> {
        if raw_tokens.is_empty() {
            return Err(RelGraphError::EmptyQuestion);
        }
        if raw_tokens.len() != lemmas.len() {
            return Err(RelGraphError::LemmaLengthMismatch {
                tokens: raw_tokens.len(),
                lemmas: lemmas.len(),
            });
        }
        Ok(Question { raw_tokens, lemmas })
    }

    /// Builds a question whose lemmas are the lowercased tokens.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self, RelGraphError> {
        let raw: Vec<String> = words.iter().map(|w| w.as_ref().to_string()).collect();
        let lemmas = raw.iter().map(|w| w.to_lowercase()).collect();
        Question::new(raw, lemmas)
    }

    pub fn len(&self) -> usize {
        self.raw_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_tokens.is_empty()
    }

    pub fn raw_tokens(&self) -> &[String] {
        &self.raw_tokens
    }

    pub fn lemmas(&self) -> &[String] {
        &self.lemmas
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

impl ColumnType {
    pub const ALL: [ColumnType; 5] = [
        ColumnType::Text,
        ColumnType::Number,
        ColumnType::Time,
        ColumnType::Boolean,
        ColumnType::Others,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Text => "text",
            ColumnType::Number => "number",
            ColumnType::Time => "time",
            ColumnType::Boolean => "boolean",
            ColumnType::Others => "others",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name_words: Vec<String>,
}

impl Table {
    pub fn new<S: AsRef<str>>(words: &[S]) -> Self {
        Table {
            name_words: words.iter().map(|w| w.as_ref().to_string()).collect(),
        }
    }

    /// SQL identifier: lowercased name words joined by `_`.
    pub fn identifier(&self) -> String {
        identifier_of(&self.name_words)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name_words: Vec<String>,
    pub owner_table: usize,
    pub type_tag: ColumnType,
    #[serde(default)]
    pub is_primary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_values: Option<Vec<String>>,
}

impl Column {
    pub fn new<S: AsRef<str>>(words: &[S], owner_table: usize, type_tag: ColumnType) -> Self {
        Column {
            name_words: words.iter().map(|w| w.as_ref().to_string()).collect(),
            owner_table,
            type_tag,
            is_primary: false,
            cell_values: None,
        }
    }

    pub fn primary(mut self) -> Self {
        self.is_primary = true;
        self
    }

    pub fn with_values<S: AsRef<str>>(mut self, values: &[S]) -> Self {
        self.cell_values = Some(values.iter().map(|v| v.as_ref().to_string()).collect());
        self
    }

    pub fn identifier(&self) -> String {
        identifier_of(&self.name_words)
    }
}

fn identifier_of(words: &[String]) -> String {
    words
        .iter()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

/// Tables, columns and foreign keys of one database.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub tables: Vec<Table>,
    pub columns: Vec<Column>,
    /// `(child column, referenced column)` pairs.
    #[serde(default)]
    pub foreign_keys: Vec<(usize, usize)>,
}

impl Schema {
    pub fn num_items(&self) -> usize {
        self.tables.len() + self.columns.len()
    }

    pub fn columns_of(&self, table: usize) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.owner_table == table)
            .map(|(i, _)| i)
    }

    /// Foreign keys with duplicates removed, in first-seen order.
    pub fn distinct_foreign_keys(&self) -> Vec<(usize, usize)> {
        let mut seen = HashSet::new();
        self.foreign_keys
            .iter()
            .copied()
            .filter(|fk| seen.insert(*fk))
            .collect()
    }

    /// Every structural problem with this schema; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.tables.is_empty() {
            out.push("schema has no tables".to_string());
        }
        if self.columns.is_empty() {
            out.push("schema has no columns".to_string());
        }
        for (i, t) in self.tables.iter().enumerate() {
            if t.name_words.is_empty() || t.name_words.iter().any(|w| w.trim().is_empty()) {
                out.push(format!("table {i} has an empty name word"));
            }
        }
        let mut table_ids = HashSet::new();
        for t in &self.tables {
            if !table_ids.insert(t.identifier()) {
                out.push(format!("duplicate table identifier `{}`", t.identifier()));
            }
        }
        let mut column_ids = HashSet::new();
        for (i, c) in self.columns.iter().enumerate() {
            if c.name_words.is_empty() || c.name_words.iter().any(|w| w.trim().is_empty()) {
                out.push(format!("column {i} has an empty name word"));
            }
            if c.owner_table >= self.tables.len() {
                out.push(format!(
                    "column {i} owner_table {} out of range",
                    c.owner_table
                ));
            } else if !column_ids.insert((c.owner_table, c.identifier())) {
                out.push(format!(
                    "duplicate column identifier `{}` in table {}",
                    c.identifier(),
                    c.owner_table
                ));
            }
        }
        let fks: HashSet<_> = self.foreign_keys.iter().copied().collect();
        for &(a, b) in &self.foreign_keys {
            if a >= self.columns.len() || b >= self.columns.len() {
                out.push(format!("foreign key ({a}, {b}) references a missing column"));
            } else if a == b {
                out.push(format!("foreign key ({a}, {b}) is a self reference"));
            } else if a < b && fks.contains(&(b, a)) {
                out.push(format!("foreign keys ({a}, {b}) and ({b}, {a}) are mutual"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), RelGraphError> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(first) => Err(RelGraphError::InvalidSchema(first)),
        }
    }
}
