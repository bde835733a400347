use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{link_schema, MatchKind, NodeType, Question, RelGraphError, RelationType, Schema, SchemaLinking};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub source: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalEdge {
    pub src: usize,
    pub dst: usize,
    pub relation: RelationType,
}

/// All question nodes, then tables, then columns.
pub fn build_nodes(question: &Question, schema: &Schema) -> Result<Vec<Node>, RelGraphError> {
    if question.is_empty() {
        return Err(RelGraphError::EmptyQuestion);
    }
    if schema.tables.is_empty() || schema.columns.is_empty() {
        return Err(RelGraphError::EmptySchema);
    }
    let q = (0..question.len()).map(|source| Node {
        node_type: NodeType::Question,
        source,
    });
    let t = (0..schema.tables.len()).map(|source| Node {
        node_type: NodeType::Table,
        source,
    });
    let c = (0..schema.columns.len()).map(|source| Node {
        node_type: NodeType::Column,
        source,
    });
    Ok(q.chain(t).chain(c).collect())
}

fn table_tag(kind: MatchKind) -> Option<RelationType> {
    match kind {
        MatchKind::NoMatch => Some(RelationType::QtNoMatch),
        MatchKind::PartialMatch => Some(RelationType::QtPartialMatch),
        MatchKind::ExactMatch => Some(RelationType::QtExactMatch),
        MatchKind::ValueMatch => None,
    }
}

fn column_tag(kind: MatchKind) -> RelationType {
    match kind {
        MatchKind::NoMatch => RelationType::QcNoMatch,
        MatchKind::PartialMatch => RelationType::QcPartialMatch,
        MatchKind::ExactMatch => RelationType::QcExactMatch,
        MatchKind::ValueMatch => RelationType::QcValueMatch,
    }
}

/// Every local edge in both directions, sorted by `(src, dst)`.
pub fn build_local_relations(
    question: &Question,
    schema: &Schema,
    linking: &SchemaLinking,
) -> Result<Vec<LocalEdge>, RelGraphError> {
    let nq = question.len();
    let nt = schema.tables.len();
    let nc = schema.columns.len();
    if linking.num_tokens() != nq || linking.num_tables() != nt || linking.num_columns() != nc {
        return Err(RelGraphError::InconsistentLinking(format!(
            "linking covers {}x({}+{}) pairs but the inputs have {}x({}+{})",
            linking.num_tokens(),
            linking.num_tables(),
            linking.num_columns(),
            nq,
            nt,
            nc
        )));
    }
    let t0 = nq;
    let c0 = nq + nt;
    let mut edges = Vec::new();
    let mut both = |src: usize, dst: usize, relation: RelationType| {
        edges.push(LocalEdge { src, dst, relation });
        edges.push(LocalEdge {
            src: dst,
            dst: src,
            relation: relation.reverse(),
        });
    };

    for i in 1..nq {
        both(i - 1, i, RelationType::QqDistPlus1);
    }
    for (child, referenced) in schema.distinct_foreign_keys() {
        if child >= nc || referenced >= nc || child == referenced {
            return Err(RelGraphError::InvalidSchema(format!(
                "foreign key ({child}, {referenced}) is invalid"
            )));
        }
        both(c0 + child, c0 + referenced, RelationType::CcForeignKey);
    }
    for (c, col) in schema.columns.iter().enumerate() {
        if col.owner_table >= nt {
            return Err(RelGraphError::InvalidSchema(format!(
                "column {c} owner_table {} out of range",
                col.owner_table
            )));
        }
        let tag = if col.is_primary {
            RelationType::TcPrimaryKey
        } else {
            RelationType::TcHas
        };
        both(t0 + col.owner_table, c0 + c, tag);
    }
    for q in 0..nq {
        for t in 0..nt {
            let tag = table_tag(linking.table(q, t)).ok_or_else(|| {
                RelGraphError::InconsistentLinking(format!("value match between token {q} and table {t}"))
            })?;
            both(q, t0 + t, tag);
        }
        for c in 0..nc {
            both(q, c0 + c, column_tag(linking.column(q, c)));
        }
    }
    edges.sort();
    Ok(edges)
}

/// Fills every pair not covered by a local edge with a non-local tag.
pub fn derive_nonlocal_relations(
    nodes: &[Node],
    local_edges: &[LocalEdge],
    schema: &Schema,
) -> Vec<RelationType> {
    let n = nodes.len();
    let mut matrix: Vec<Option<RelationType>> = vec![None; n * n];
    for e in local_edges {
        matrix[e.src * n + e.dst] = Some(e.relation);
    }

    // Table-level foreign-key directions, keyed by (owner of child, owner of referenced).
    let mut table_links: HashMap<(usize, usize), ()> = HashMap::new();
    for (child, referenced) in schema.distinct_foreign_keys() {
        let a = schema.columns[child].owner_table;
        let b = schema.columns[referenced].owner_table;
        if a != b {
            table_links.insert((a, b), ());
        }
    }

    let mut out = Vec::with_capacity(n * n);
    for (i, a) in nodes.iter().enumerate() {
        for (j, b) in nodes.iter().enumerate() {
            if let Some(tag) = matrix[i * n + j] {
                out.push(tag);
                continue;
            }
            let tag = if i == j {
                RelationType::identity_for(a.node_type)
            } else {
                match (a.node_type, b.node_type) {
                    (NodeType::Question, NodeType::Question) => RelationType::QqDistFar,
                    (NodeType::Column, NodeType::Column)
                        if schema.columns[a.source].owner_table
                            == schema.columns[b.source].owner_table =>
                    {
                        RelationType::CcSameTable
                    }
                    (NodeType::Table, NodeType::Table) => {
                        let fwd = table_links.contains_key(&(a.source, b.source));
                        let rev = table_links.contains_key(&(b.source, a.source));
                        match (fwd, rev) {
                            (true, true) => RelationType::TtForeignKeyBoth,
                            (true, false) => RelationType::TtForeignKey,
                            (false, true) => RelationType::TtForeignKeyRev,
                            (false, false) => RelationType::TtDefault,
                        }
                    }
                    (s, d) => RelationType::default_for(s, d),
                }
            };
            out.push(tag);
        }
    }
    out
}

/// The node-centric heterogeneous graph with a dense relation matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCentricGraph {
    nodes: Vec<Node>,
    relation: Vec<RelationType>,
    local_edges: Vec<LocalEdge>,
}

impl NodeCentricGraph {
    /// Runs the full pipeline: nodes, linking, local edges, non-local completion.
    pub fn build(question: &Question, schema: &Schema) -> Result<Self, RelGraphError> {
        let nodes = build_nodes(question, schema)?;
        schema.validate()?;
        let linking = link_schema(question, schema);
        let local_edges = build_local_relations(question, schema, &linking)?;
        let relation = derive_nonlocal_relations(&nodes, &local_edges, schema);
        Ok(NodeCentricGraph {
            nodes,
            relation,
            local_edges,
        })
    }

    /// Assembles a graph without checking invariants; see [`validate_graph`].
    pub fn from_parts(nodes: Vec<Node>, relation: Vec<RelationType>, local_edges: Vec<LocalEdge>) -> Self {
        NodeCentricGraph {
            nodes,
            relation,
            local_edges,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_type(&self, i: usize) -> NodeType {
        self.nodes[i].node_type
    }

    pub fn count(&self, ty: NodeType) -> usize {
        self.nodes.iter().filter(|n| n.node_type == ty).count()
    }

    pub fn relation(&self, src: usize, dst: usize) -> RelationType {
        self.relation[src * self.nodes.len() + dst]
    }

    pub fn relation_matrix(&self) -> &[RelationType] {
        &self.relation
    }

    pub fn local_edges(&self) -> &[LocalEdge] {
        &self.local_edges
    }

    pub fn relation_matrix_mut(&mut self) -> &mut [RelationType] {
        &mut self.relation
    }

    pub fn local_edges_mut(&mut self) -> &mut Vec<LocalEdge> {
        &mut self.local_edges
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphViolation {
    /// Node list is not question-then-table-then-column with dense sources.
    Ordering { index: usize },
    MatrixSize { expected: usize, found: usize },
    /// A non-identity tag on the diagonal.
    Diagonal { index: usize, tag: RelationType },
    TypeMismatch { src: usize, dst: usize, tag: RelationType },
    /// A question/schema pair without a Match-series tag.
    MissingMatch { src: usize, dst: usize, tag: RelationType },
    /// Matrix holds a local tag absent from the edge list.
    LocalEdgeMissing { src: usize, dst: usize, tag: RelationType },
    /// Edge list entry disagrees with the matrix, repeats, or carries a non-local tag.
    LocalEdgeMismatch { src: usize, dst: usize, tag: RelationType },
    /// Unordered local pair whose two directions are not reverses.
    ReverseMismatch { a: usize, b: usize },
}

pub fn validate_graph(graph: &NodeCentricGraph) -> Vec<GraphViolation> {
    let mut out = Vec::new();
    let n = graph.nodes.len();

    let mut expected_type = 0u8;
    let mut expected_source = 0usize;
    for (i, node) in graph.nodes.iter().enumerate() {
        let rank = match node.node_type {
            NodeType::Question => 0u8,
            NodeType::Table => 1,
            NodeType::Column => 2,
        };
        if rank != expected_type {
            if rank < expected_type {
                out.push(GraphViolation::Ordering { index: i });
                continue;
            }
            expected_type = rank;
            expected_source = 0;
        }
        if node.source != expected_source {
            out.push(GraphViolation::Ordering { index: i });
        }
        expected_source = node.source + 1;
    }

    if graph.relation.len() != n * n {
        out.push(GraphViolation::MatrixSize {
            expected: n * n,
            found: graph.relation.len(),
        });
        return out;
    }

    for i in 0..n {
        for j in 0..n {
            let tag = graph.relation(i, j);
            let types = (graph.node_type(i), graph.node_type(j));
            if i == j && tag != RelationType::identity_for(types.0) {
                out.push(GraphViolation::Diagonal { index: i, tag });
                continue;
            }
            if tag.endpoints() != types {
                out.push(GraphViolation::TypeMismatch { src: i, dst: j, tag });
                continue;
            }
            let crosses = matches!(
                types,
                (NodeType::Question, NodeType::Table | NodeType::Column)
                    | (NodeType::Table | NodeType::Column, NodeType::Question)
            );
            if crosses && !tag.is_match_series() {
                out.push(GraphViolation::MissingMatch { src: i, dst: j, tag });
            }
        }
    }

    let mut listed: HashMap<(usize, usize), RelationType> = HashMap::new();
    for e in &graph.local_edges {
        let in_range = e.src < n && e.dst < n;
        let duplicate = listed.insert((e.src, e.dst), e.relation).is_some();
        if !in_range || duplicate || !e.relation.is_local() || graph.relation(e.src, e.dst) != e.relation {
            out.push(GraphViolation::LocalEdgeMismatch {
                src: e.src,
                dst: e.dst,
                tag: e.relation,
            });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let tag = graph.relation(i, j);
            if tag.is_local() && !listed.contains_key(&(i, j)) {
                out.push(GraphViolation::LocalEdgeMissing { src: i, dst: j, tag });
            }
            if i < j {
                let back = graph.relation(j, i);
                if (tag.is_local() || back.is_local()) && back != tag.reverse() {
                    out.push(GraphViolation::ReverseMismatch { a: i, b: j });
                }
            }
        }
    }
    out
}
