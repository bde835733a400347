use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{validate_graph, LocalEdge, Node, NodeCentricGraph, RelGraphError, RelationType};

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<Node>,
    local_edges: Vec<(usize, usize, RelationType)>,
    relation_matrix: Vec<Vec<RelationType>>,
}

impl NodeCentricGraph {
    pub fn to_json(&self) -> String {
        let n = self.num_nodes();
        let doc = GraphJson {
            nodes: self.nodes().to_vec(),
            local_edges: self
                .local_edges()
                .iter()
                .map(|e| (e.src, e.dst, e.relation))
                .collect(),
            relation_matrix: self.relation_matrix().chunks(n.max(1)).map(|r| r.to_vec()).collect(),
        };
        serde_json::to_string(&doc).expect("graph json serialization")
    }

    /// Parses the graph JSON format and rejects structurally invalid graphs.
    pub fn from_json(text: &str) -> Result<Self, RelGraphError> {
        let doc: GraphJson =
            serde_json::from_str(text).map_err(|e| RelGraphError::Import(e.to_string()))?;
        let n = doc.nodes.len();
        if doc.relation_matrix.len() != n || doc.relation_matrix.iter().any(|r| r.len() != n) {
            return Err(RelGraphError::Import(format!("relation matrix must be {n}x{n}")));
        }
        let local_edges = doc
            .local_edges
            .into_iter()
            .map(|(src, dst, relation)| LocalEdge { src, dst, relation })
            .collect();
        let graph = NodeCentricGraph::from_parts(
            doc.nodes,
            doc.relation_matrix.into_iter().flatten().collect(),
            local_edges,
        );
        let violations = validate_graph(&graph);
        if let Some(first) = violations.first() {
            return Err(RelGraphError::Import(format!(
                "{} invariant violation(s), first: {first:?}",
                violations.len()
            )));
        }
        Ok(graph)
    }

    /// DOT rendering with one node per graph node and local edges only.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph node_centric {\n");
        for (i, node) in self.nodes().iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{i} [label=\"{}{}\"];",
                node.node_type.short(),
                node.source
            );
        }
        for e in self.local_edges() {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.src, e.dst, e.relation);
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::relgraph::{Column, ColumnType, NodeCentricGraph, Question, Schema, Table};

    fn graph() -> NodeCentricGraph {
        let q = Question::from_words(&["how", "many", "singer"]).unwrap();
        let s = Schema {
            tables: vec![Table::new(&["singer"])],
            columns: vec![
                Column::new(&["name"], 0, ColumnType::Text),
                Column::new(&["age"], 0, ColumnType::Number),
            ],
            foreign_keys: vec![],
        };
        NodeCentricGraph::build(&q, &s).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let g = graph();
        let text = g.to_json();
        assert_eq!(NodeCentricGraph::from_json(&text).unwrap(), g);
        assert!(text.contains("\"type\":\"question\""));
        assert!(text.contains("[0,1,\"QQ-Dist+1\"]"));
    }

    #[test]
    fn corrupted_json_is_rejected() {
        let text = graph().to_json().replacen("QQ-Dist+1", "QQ-DistFar", 1);
        assert!(NodeCentricGraph::from_json(&text).is_err());
        assert!(NodeCentricGraph::from_json("{").is_err());
    }

    #[test]
    fn dot_lists_local_edges() {
        let g = graph();
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph node_centric {"));
        assert_eq!(dot.matches("->").count(), g.local_edges().len());
    }
}
