//! Node-centric heterogeneous graph over question tokens, tables and columns.

mod export;
mod graph;
mod linking;
pub mod random;
mod relation;
mod schema;

pub use graph::{
    build_local_relations, build_nodes, derive_nonlocal_relations, validate_graph, GraphViolation,
    LocalEdge, Node, NodeCentricGraph,
};
pub use linking::{link_schema, MatchKind, SchemaLinking};
pub use relation::{Locality, NodeType, RelationType};
pub use schema::{Column, ColumnType, Question, Schema, Table};

#[derive(Debug, thiserror::Error)]
pub enum RelGraphError {
    #[error("question has no tokens")]
    EmptyQuestion,
    #[error("schema needs at least one table and one column")]
    EmptySchema,
    #[error("question has {tokens} tokens but {lemmas} lemmas")]
    LemmaLengthMismatch { tokens: usize, lemmas: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("inconsistent linking: {0}")]
    InconsistentLinking(String),
    #[error("graph import failed: {0}")]
    Import(String),
}
