use crate::relgraph::Schema;
use crate::sqlgrammar::Sql;

use super::PrunerError;

/// One label per schema item, tables first: 1 for every table named in a
/// FROM clause and every column referenced anywhere, nested queries
/// included.
pub fn gold_schema_labels(ast: &Sql, schema: &Schema) -> Result<Vec<f64>, PrunerError> {
    let (tables, columns) = ast.references();
    if let Some(t) = tables.iter().find(|&&t| t >= schema.tables.len()) {
        return Err(PrunerError::DanglingReference(format!("table {t}")));
    }
    if let Some(c) = columns.iter().find(|&&c| c >= schema.columns.len()) {
        return Err(PrunerError::DanglingReference(format!("column {c}")));
    }
    let mut labels = vec![0.0; schema.num_items()];
    for t in tables {
        labels[t] = 1.0;
    }
    for c in columns {
        labels[schema.tables.len() + c] = 1.0;
    }
    Ok(labels)
}
