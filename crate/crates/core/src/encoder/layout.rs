//! Index tables that turn relation lookups into row gathers.
//!
//! Pair `(j → i)` is stored at flat position `i * n + j`, so row `i` of a
//! pair tensor holds everything node `i` attends over.

use crate::linegraph::LineGraph;
use crate::relgraph::{NodeCentricGraph, RelationType};
use crate::tensor::Tensor;

use super::EncoderError;

/// Where a relation feature comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsiView {
    /// Layer-wise line-graph embeddings; only local tags have one.
    Dynamic,
    /// Initial local features and the non-local table.
    Static,
}

/// Relation feature of pair `(j → i)` carrying `tag`.
///
/// `z_0` is the initial line-graph embedding matrix and `z_nlc` the
/// non-local table, indexed by [`RelationType::nonlocal_index`].
pub fn psi_lookup(
    tag: RelationType,
    pair: (usize, usize),
    line_graph: &LineGraph,
    z_l: &Tensor,
    z_nlc: &Tensor,
    z_0: &Tensor,
    view: PsiView,
) -> Result<Vec<f64>, EncoderError> {
    let local_row = |z: &Tensor| -> Result<Vec<f64>, EncoderError> {
        let row = line_graph
            .index_of(pair.0, pair.1)
            .ok_or_else(|| EncoderError::InconsistentLayout(format!("{pair:?} is not a local edge")))?;
        Ok(z.row(row).to_vec())
    };
    match (tag.nonlocal_index(), view) {
        (None, PsiView::Dynamic) => local_row(z_l),
        (None, PsiView::Static) => local_row(z_0),
        (Some(row), PsiView::Static) => Ok(z_nlc.row(row).to_vec()),
        (Some(_), PsiView::Dynamic) => Err(EncoderError::NonLocalInDynamicView(tag)),
    }
}

/// Precomputed per-graph indices used by the attention layers.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphLayout {
    num_nodes: usize,
    num_line_nodes: usize,
    /// Row of `[Z^l; Z_nlc]` for every pair: the full-neighbourhood view.
    mixed_index: Vec<usize>,
    /// Row of `[local table; non-local table]` for every pair.
    static_index: Vec<usize>,
    /// Row of `[Z^l; Z_nlc]` for the 1-hop view, and which pairs it keeps.
    local_index: Vec<usize>,
    local_mask: Vec<bool>,
    line_tags: Vec<usize>,
    line_sources: Vec<usize>,
    line_mask: Vec<bool>,
    line_has_in: Vec<f64>,
}

impl GraphLayout {
    pub fn new(graph: &NodeCentricGraph, line_graph: &LineGraph) -> Result<Self, EncoderError> {
        let n = graph.num_nodes();
        let m = line_graph.num_nodes();
        let mut mixed_index = vec![0; n * n];
        let mut static_index = vec![0; n * n];
        let mut local_index = vec![0; n * n];
        let mut local_mask = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                let tag = graph.relation(j, i);
                let at = i * n + j;
                static_index[at] = tag as usize;
                if tag.is_local() {
                    let row = line_graph.index_of(j, i).ok_or_else(|| {
                        EncoderError::InconsistentLayout(format!("local pair ({j}, {i}) has no line node"))
                    })?;
                    mixed_index[at] = row;
                    local_index[at] = row;
                    local_mask[at] = true;
                } else {
                    let row = tag.nonlocal_index().expect("non-local");
                    mixed_index[at] = m + row;
                }
            }
            // no local in-edge: the 1-hop view attends to the node itself
            if !local_mask[i * n..(i + 1) * n].iter().any(|&k| k) {
                let identity = RelationType::identity_for(graph.node_type(i));
                local_index[i * n + i] = m + identity.nonlocal_index().expect("identity is non-local");
                local_mask[i * n + i] = true;
            }
        }
        let mut line_tags = Vec::with_capacity(m);
        let mut line_sources = Vec::with_capacity(m);
        for (k, &(src, dst)) in line_graph.endpoints().iter().enumerate() {
            if src >= n || dst >= n {
                return Err(EncoderError::InconsistentLayout(format!("line node {k} leaves the graph")));
            }
            let tag = line_graph.tag(k);
            line_tags.push(tag.local_index().ok_or_else(|| {
                EncoderError::InconsistentLayout(format!("line node {k} carries non-local tag {tag}"))
            })?);
            line_sources.push(src);
        }
        let mut line_mask = vec![false; m * m];
        let mut line_has_in = vec![0.0; m];
        for e in line_graph.edges() {
            line_mask[e.to * m + e.from] = true;
            line_has_in[e.to] = 1.0;
            if e.connecting_node != line_sources[e.to] {
                return Err(EncoderError::InconsistentLayout(format!(
                    "line edge {} -> {} connects through {}, not the source of {}",
                    e.from, e.to, e.connecting_node, e.to
                )));
            }
        }
        Ok(GraphLayout {
            num_nodes: n,
            num_line_nodes: m,
            mixed_index,
            static_index,
            local_index,
            local_mask,
            line_tags,
            line_sources,
            line_mask,
            line_has_in,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_line_nodes(&self) -> usize {
        self.num_line_nodes
    }

    pub fn mixed_index(&self) -> &[usize] {
        &self.mixed_index
    }

    pub fn static_index(&self) -> &[usize] {
        &self.static_index
    }

    pub fn local_index(&self) -> &[usize] {
        &self.local_index
    }

    pub fn local_mask(&self) -> &[bool] {
        &self.local_mask
    }

    /// Local-table row of each line node's tag.
    pub fn line_tags(&self) -> &[usize] {
        &self.line_tags
    }

    /// Source node of each line node's edge.
    pub fn line_sources(&self) -> &[usize] {
        &self.line_sources
    }

    pub fn line_mask(&self) -> &[bool] {
        &self.line_mask
    }

    /// 1 for line nodes with at least one in-edge, else 0.
    pub fn line_has_in(&self) -> &[f64] {
        &self.line_has_in
    }
}
