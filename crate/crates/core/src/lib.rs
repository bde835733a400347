//! Heterogeneous question/schema graph encoding for text-to-SQL.
//!
//! The pipeline runs from rule-based schema linking ([`relgraph`]) through
//! the edge-centric dual graph ([`linegraph`]) into a stack of dual
//! relational attention layers ([`encoder`]) trained with a schema-pruning
//! objective ([`pruner`]). [`sqlgrammar`] converts SQL to and from the
//! action sequences a grammar-based decoder would emit.

pub mod linegraph;
pub mod relgraph;
pub mod tensor;
pub mod encoder;
pub mod pruner;
pub mod sqlgrammar;
