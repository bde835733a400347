//! Dataset files: schemas keyed by database id plus question/SQL pairs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use relsql::encoder::PreparedExample;
use relsql::pruner::{gold_schema_labels, PruningExample};
use relsql::relgraph::{Question, Schema};
use relsql::sqlgrammar::parse_sql;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetExample {
    pub db_id: String,
    pub question_tokens: Vec<String>,
    pub question_lemmas: Vec<String>,
    pub sql: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub databases: BTreeMap<String, Schema>,
    pub examples: Vec<DatasetExample>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{0}")]
    Validation(Violations),
}

/// Every problem found in a dataset, one message per violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violations(pub Vec<String>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl DatasetFile {
    /// Parses and validates dataset JSON.
    pub fn parse(text: &str) -> Result<DatasetFile, DatasetError> {
        let file: DatasetFile = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let violations = file.violations();
        if !violations.is_empty() {
            return Err(DatasetError::Validation(Violations(violations)));
        }
        Ok(file)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (id, schema) in &self.databases {
            out.extend(schema.violations().into_iter().map(|v| format!("database {id}: {v}")));
        }
        for (i, e) in self.examples.iter().enumerate() {
            if !self.databases.contains_key(&e.db_id) {
                out.push(format!("example {i}: unknown db_id `{}`", e.db_id));
            }
            if e.question_tokens.is_empty() {
                out.push(format!("example {i}: empty question"));
            }
            if e.question_tokens.len() != e.question_lemmas.len() {
                out.push(format!(
                    "example {i}: {} tokens but {} lemmas",
                    e.question_tokens.len(),
                    e.question_lemmas.len()
                ));
            }
        }
        out
    }

    pub fn schema(&self, example: usize) -> &Schema {
        &self.databases[&self.examples[example].db_id]
    }

    pub fn question(&self, example: usize) -> Question {
        let e = &self.examples[example];
        Question::new(e.question_tokens.clone(), e.question_lemmas.clone()).expect("validated at load")
    }

    pub fn prepared(&self, example: usize) -> PreparedExample {
        PreparedExample::new(self.question(example), self.schema(example).clone()).expect("validated at load")
    }

    /// Every example with gold labels from its SQL; queries outside the
    /// grammar are reported as violations.
    pub fn pruning_examples(&self) -> Result<Vec<PruningExample>, DatasetError> {
        let mut out = Vec::new();
        let mut bad = Vec::new();
        for (i, e) in self.examples.iter().enumerate() {
            let schema = self.schema(i);
            match parse_sql(&e.sql, schema)
                .map_err(|err| err.to_string())
                .and_then(|ast| gold_schema_labels(&ast, schema).map_err(|err| err.to_string()))
            {
                Ok(labels) => out.push(PruningExample {
                    example: self.prepared(i),
                    labels,
                }),
                Err(message) => bad.push(format!("example {i}: {message}")),
            }
        }
        if bad.is_empty() {
            Ok(out)
        } else {
            Err(DatasetError::Validation(Violations(bad)))
        }
    }
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    DatasetFile::parse(&text)
}
