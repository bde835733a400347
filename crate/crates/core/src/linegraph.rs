//! Edge-centric line graph over the local edges of a [`NodeCentricGraph`].
//!
//! Line node `i` stands for local edge `f⁻¹(i) = (s, t)`. A line edge runs
//! from `i` to `j` when `f⁻¹(i) = (s, t)` and `f⁻¹(j) = (t, u)`, except when
//! `u = s` (back-tracking) or when both edges carry Match-series tags. The
//! shared node `t` is stored as the line edge's connecting node.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::relgraph::{NodeCentricGraph, RelationType};

/// Cap on local edges accepted by [`brute_force_line_graph`].
pub const ORACLE_EDGE_CAP: usize = 10_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LineGraphError {
    #[error("({src}, {dst}) is not a local edge")]
    NotALocalEdge { src: usize, dst: usize },
    #[error("brute-force oracle limited to {cap} local edges, got {edges}")]
    OracleTooLarge { edges: usize, cap: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LineEdge {
    pub from: usize,
    pub to: usize,
    pub connecting_node: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineGraph {
    /// `f⁻¹`: endpoints of each line node, sorted lexicographically.
    endpoints: Vec<(usize, usize)>,
    tags: Vec<RelationType>,
    index: HashMap<(usize, usize), usize>,
    edges: Vec<LineEdge>,
}

fn blocked(a: RelationType, b: RelationType) -> bool {
    a.is_match_series() && b.is_match_series()
}

impl LineGraph {
    fn with_nodes(graph: &NodeCentricGraph) -> LineGraph {
        let mut local: Vec<_> = graph.local_edges().to_vec();
        local.sort();
        let endpoints: Vec<(usize, usize)> = local.iter().map(|e| (e.src, e.dst)).collect();
        let tags = local.iter().map(|e| e.relation).collect();
        let index = endpoints.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        LineGraph {
            endpoints,
            tags,
            index,
            edges: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.endpoints.len()
    }

    pub fn endpoints(&self) -> &[(usize, usize)] {
        &self.endpoints
    }

    pub fn tag(&self, line_node: usize) -> RelationType {
        self.tags[line_node]
    }

    pub fn tags(&self) -> &[RelationType] {
        &self.tags
    }

    pub fn edges(&self) -> &[LineEdge] {
        &self.edges
    }

    /// `f`: line node of local edge `(src, dst)`.
    pub fn index_of(&self, src: usize, dst: usize) -> Option<usize> {
        self.index.get(&(src, dst)).copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges
            .binary_search_by(|e| (e.from, e.to).cmp(&(from, to)))
            .is_ok()
    }

    /// Line nodes with an edge into `to`, i.e. the 1-hop receptive field.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_nodes()];
        for e in &self.edges {
            out[e.to].push(e.from);
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            line_nodes: &'a [(usize, usize)],
            line_edges: Vec<(usize, usize, usize)>,
        }
        let doc = Doc {
            line_nodes: &self.endpoints,
            line_edges: self
                .edges
                .iter()
                .map(|e| (e.from, e.to, e.connecting_node))
                .collect(),
        };
        serde_json::to_string(&doc).expect("line graph json serialization")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph line_graph {\n");
        for (i, (s, t)) in self.endpoints.iter().enumerate() {
            let _ = writeln!(out, "  e{i} [label=\"{s}->{t} {}\"];", self.tags[i]);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  e{} -> e{} [label=\"n{}\"];",
                e.from, e.to, e.connecting_node
            );
        }
        out.push_str("}\n");
        out
    }
}

pub fn construct_line_graph(graph: &NodeCentricGraph) -> LineGraph {
    let mut lg = LineGraph::with_nodes(graph);
    // endpoints are sorted by source, so out-edges of each node are contiguous
    let n = graph.num_nodes();
    let mut start = vec![0usize; n + 1];
    for &(s, _) in &lg.endpoints {
        start[s + 1] += 1;
    }
    for v in 0..n {
        start[v + 1] += start[v];
    }
    let mut edges = Vec::new();
    for (i, &(s, t)) in lg.endpoints.iter().enumerate() {
        for j in start[t]..start[t + 1] {
            let (_, u) = lg.endpoints[j];
            if u == s || blocked(lg.tags[i], lg.tags[j]) {
                continue;
            }
            edges.push(LineEdge {
                from: i,
                to: j,
                connecting_node: t,
            });
        }
    }
    lg.edges = edges;
    lg
}

/// Quadratic reference construction applying the three rules pair by pair.
pub fn brute_force_line_graph(graph: &NodeCentricGraph) -> Result<LineGraph, LineGraphError> {
    let edges = graph.local_edges().len();
    if edges > ORACLE_EDGE_CAP {
        return Err(LineGraphError::OracleTooLarge {
            edges,
            cap: ORACLE_EDGE_CAP,
        });
    }
    let mut lg = LineGraph::with_nodes(graph);
    let mut out = Vec::new();
    for i in 0..lg.endpoints.len() {
        for j in 0..lg.endpoints.len() {
            let (s, t) = lg.endpoints[i];
            let (t2, u) = lg.endpoints[j];
            let consecutive = t == t2;
            let backtrack = s == u && t == t2;
            if i != j && consecutive && !backtrack && !blocked(lg.tags[i], lg.tags[j]) {
                out.push(LineEdge {
                    from: i,
                    to: j,
                    connecting_node: t,
                });
            }
        }
    }
    lg.edges = out;
    Ok(lg)
}

pub fn map_edge_index(lg: &LineGraph, src: usize, dst: usize) -> Result<usize, LineGraphError> {
    lg.index_of(src, dst)
        .ok_or(LineGraphError::NotALocalEdge { src, dst })
}

/// The length-2 meta-path `(r_{f⁻¹(i)}, r_{f⁻¹(j)})` realized by line edge `(i, j)`.
pub fn compose_meta_path(lg: &LineGraph, i: usize, j: usize) -> Option<(RelationType, RelationType)> {
    lg.has_edge(i, j).then(|| (lg.tags[i], lg.tags[j]))
}
