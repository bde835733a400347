//! Initial node and line-node embeddings.

use rand::RngCore;

use crate::relgraph::{ColumnType, NodeType};
use crate::tensor::init::{normal, xavier_uniform};
use crate::tensor::{Bound, EmptyRows, ParamStore, Tape, Tensor, TensorError, Var};
use crate::relgraph::RelationType;

use super::{EncoderConfig, EncoderError, PreparedExample, Vocab};

const EMBED_STD: f64 = 0.02;

/// Rows of the node-type table: question, table, then one per column type.
pub(crate) const TYPE_ROWS: usize = 2 + ColumnType::ALL.len();

pub(crate) fn type_row(node: NodeType, column_type: Option<ColumnType>) -> usize {
    match (node, column_type) {
        (NodeType::Question, _) => 0,
        (NodeType::Table, _) => 1,
        (NodeType::Column, Some(t)) => 2 + t as usize,
        (NodeType::Column, None) => 2 + ColumnType::Others as usize,
    }
}

pub(crate) fn init_params(
    cfg: &EncoderConfig,
    vocab_len: usize,
    store: &mut ParamStore,
    rng: &mut dyn RngCore,
) -> Result<(), TensorError> {
    let d = cfg.hidden;
    let word_dim = cfg.word_dim.unwrap_or(d);
    store.insert("embed.word", normal(vocab_len, word_dim, EMBED_STD, rng))?;
    if let Some(w) = cfg.word_dim {
        store.insert("embed.word_proj", xavier_uniform(w, d, rng))?;
    }
    store.insert("embed.type", normal(TYPE_ROWS, d, EMBED_STD, rng))?;
    store.insert("embed.local_relation", normal(RelationType::LOCAL_COUNT, d, EMBED_STD, rng))?;
    store.insert("embed.nonlocal_relation", normal(RelationType::NONLOCAL_COUNT, d, EMBED_STD, rng))?;
    store.insert("pool.w", xavier_uniform(d, d, rng))?;
    store.insert("pool.v", xavier_uniform(1, d, rng))?;
    Ok(())
}

/// `Σ_i a_i v_i` with `a = softmax_i(tanh(v_i · w) · scoreᵀ)` over the rows
/// of `vectors`.
pub fn attentive_pooling<'t>(vectors: Var<'t>, w: Var<'t>, score: Var<'t>) -> Result<Var<'t>, TensorError> {
    if vectors.rows() == 0 {
        return Err(TensorError::EmptyInput("attentive_pooling"));
    }
    let logits = vectors.matmul(w)?.tanh()?.matmul(score.transpose()?)?.transpose()?;
    let weights = logits.row_softmax_scaled(1.0, None, EmptyRows::Error)?;
    weights.matmul(vectors)
}

fn word_vectors<'t>(params: &Bound<'t>, ids: Vec<usize>) -> Result<Var<'t>, TensorError> {
    let rows = params.get("embed.word")?.gather_rows(ids)?;
    match params.get("embed.word_proj") {
        Ok(p) => rows.matmul(p),
        Err(_) => Ok(rows),
    }
}

/// `(X^0, Z^0)`: token embeddings plus the question type row for question
/// nodes, attentive pooling over `[type; name words]` for schema items, and
/// the local-relation row of every line node's tag.
pub fn graph_input<'t>(
    tape: &'t Tape,
    params: &Bound<'t>,
    vocab: &Vocab,
    cfg: &EncoderConfig,
    example: &PreparedExample,
) -> Result<(Var<'t>, Var<'t>), EncoderError> {
    let types = params.get("embed.type")?;
    let (pool_w, pool_v) = (params.get("pool.w")?, params.get("pool.v")?);
    let ids: Vec<usize> = example.question.lemmas().iter().map(|w| vocab.id(w)).collect();
    let q_type = types.gather_rows(vec![type_row(NodeType::Question, None)])?;
    let mut rows = vec![word_vectors(params, ids)?.add_row(q_type)?];
    for node in &example.graph.nodes()[example.question.len()..] {
        let (words, column_type) = match node.node_type {
            NodeType::Table => (&example.schema.tables[node.source].name_words, None),
            NodeType::Column => {
                let c = &example.schema.columns[node.source];
                (&c.name_words, Some(c.type_tag))
            }
            NodeType::Question => {
                return Err(EncoderError::InconsistentLayout("question node after schema nodes".into()))
            }
        };
        let type_vec = types.gather_rows(vec![type_row(node.node_type, column_type)])?;
        let seq = if words.is_empty() {
            type_vec
        } else {
            let ids = words.iter().map(|w| vocab.id(w)).collect();
            Var::concat_rows(&[type_vec, word_vectors(params, ids)?])?
        };
        rows.push(attentive_pooling(seq, pool_w, pool_v)?);
    }
    let x0 = Var::concat_rows(&rows)?;
    let z0 = if example.layout.num_line_nodes() == 0 {
        tape.constant(Tensor::zeros(0, cfg.hidden))
    } else {
        params
            .get("embed.local_relation")?
            .gather_rows(example.layout.line_tags().to_vec())?
    };
    Ok((x0, z0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_edge_cases() {
        let tape = Tape::new();
        let w = tape.constant(Tensor::from_vec(2, 2, vec![0.3, -1.0, 0.7, 0.2]).unwrap());
        let s = tape.constant(Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap());
        let one = tape.constant(Tensor::from_rows(&[vec![0.4, 0.9]]).unwrap());
        assert_eq!(attentive_pooling(one, w, s).unwrap().value().data(), &[0.4, 0.9]);

        let same = tape.constant(Tensor::from_rows(&[vec![0.4, 0.9], vec![0.4, 0.9], vec![0.4, 0.9]]).unwrap());
        let out = attentive_pooling(same, w, s).unwrap().value();
        assert!((out.get(0, 0) - 0.4).abs() < 1e-15 && (out.get(0, 1) - 0.9).abs() < 1e-15);

        let zero = tape.constant(Tensor::zeros(1, 2));
        let mixed = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0]]).unwrap());
        let out = attentive_pooling(mixed, w, zero).unwrap().value();
        assert!((out.get(0, 0) - 2.0).abs() < 1e-15 && (out.get(0, 1) + 1.0).abs() < 1e-15);

        let empty = tape.constant(Tensor::zeros(0, 2));
        assert!(attentive_pooling(empty, w, s).is_err());
    }
}
