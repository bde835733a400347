#![allow(dead_code)]

pub mod oracles;
pub mod sql;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relsql::encoder::{Encoder, EncoderConfig, GraphLayout, PreparedExample, Scheme, Vocab};
use relsql::linegraph::{construct_line_graph, LineGraph};
use relsql::relgraph::random::{random_instance, InstanceLimits};
use relsql::relgraph::{Column, ColumnType, LocalEdge, Node, NodeCentricGraph, Question, Schema, Table};
use relsql::tensor::{ParamStore, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Three question tokens, two tables, four columns, one foreign key.
pub fn toy_example() -> PreparedExample {
    let schema = Schema {
        tables: vec![Table::new(&["singer"]), Table::new(&["concert"])],
        columns: vec![
            Column::new(&["singer", "id"], 0, ColumnType::Number).primary(),
            Column::new(&["name"], 0, ColumnType::Text).with_values(&["Joe Sharp"]),
            Column::new(&["concert", "id"], 1, ColumnType::Number).primary(),
            Column::new(&["singer", "id"], 1, ColumnType::Number),
        ],
        foreign_keys: vec![(3, 0)],
    };
    let q = Question::from_words(&["singer", "name", "joe"]).unwrap();
    PreparedExample::new(q, schema).unwrap()
}

pub fn vocab_for(examples: &[&PreparedExample]) -> Vocab {
    let mut words = Vec::new();
    for e in examples {
        words.extend(e.question.lemmas().iter().cloned());
        for t in &e.schema.tables {
            words.extend(t.name_words.iter().cloned());
        }
        for c in &e.schema.columns {
            words.extend(c.name_words.iter().cloned());
        }
    }
    Vocab::build(words, 1)
}

pub fn encoder_with_params(config: EncoderConfig, vocab: Vocab, seed: u64) -> (Encoder, ParamStore) {
    let enc = Encoder::new(config, vocab).unwrap();
    let mut store = ParamStore::new();
    enc.init_params(&mut store, &mut rng(seed)).unwrap();
    (enc, store)
}

/// A random valid example whose graph has at most `max_nodes` nodes.
pub fn random_example(rng: &mut ChaCha8Rng, max_nodes: usize) -> PreparedExample {
    let (q, s) = random_instance(rng, InstanceLimits::with_max_nodes(max_nodes));
    PreparedExample::new(q, s).unwrap()
}

pub fn config(d: usize, h: usize, l: usize, scheme: Scheme) -> EncoderConfig {
    EncoderConfig::small(d, h, l, scheme)
}

/// A graph relabeled by `perm` (old index `i` becomes `perm[i]`), its line
/// graph, and the map from old to new line-node indices.
pub fn permute_graph(graph: &NodeCentricGraph, perm: &[usize]) -> (NodeCentricGraph, LineGraph, Vec<usize>) {
    let n = graph.num_nodes();
    let mut nodes = vec![
        Node {
            node_type: graph.node_type(0),
            source: 0
        };
        n
    ];
    for i in 0..n {
        nodes[perm[i]] = graph.nodes()[i];
    }
    let mut relation = graph.relation_matrix().to_vec();
    for s in 0..n {
        for d in 0..n {
            relation[perm[s] * n + perm[d]] = graph.relation(s, d);
        }
    }
    let mut edges: Vec<LocalEdge> = graph
        .local_edges()
        .iter()
        .map(|e| LocalEdge {
            src: perm[e.src],
            dst: perm[e.dst],
            relation: e.relation,
        })
        .collect();
    edges.sort();
    let permuted = NodeCentricGraph::from_parts(nodes, relation, edges);
    let old_lg = construct_line_graph(graph);
    let new_lg = construct_line_graph(&permuted);
    let map = old_lg
        .endpoints()
        .iter()
        .map(|&(s, d)| new_lg.index_of(perm[s], perm[d]).unwrap())
        .collect();
    (permuted, new_lg, map)
}

pub fn layout(graph: &NodeCentricGraph, lg: &LineGraph) -> GraphLayout {
    GraphLayout::new(graph, lg).unwrap()
}

/// Rows of `t` moved so that row `i` lands at `map[i]`.
pub fn scatter_rows(t: &Tensor, map: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(t.rows(), t.cols());
    for (i, &j) in map.iter().enumerate() {
        out.row_mut(j).copy_from_slice(t.row(i));
    }
    out
}

pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
