//! Independent reference computations shared with the acceptance suite.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use relsql::relgraph::random::{random_instance, InstanceLimits};
use relsql::relgraph::{MatchKind, NodeCentricGraph, Question, Schema};

/// Match kind of every `(token, table)` and `(token, column)` pair, found by
/// listing every contiguous span of the question and every candidate tag,
/// then keeping the strongest.
pub fn linking_oracle(question: &Question, schema: &Schema) -> (Vec<Vec<MatchKind>>, Vec<Vec<MatchKind>>) {
    let lemmas: Vec<String> = question.lemmas().iter().map(|l| l.to_lowercase()).collect();
    let mut spans = BTreeSet::new();
    for i in 0..lemmas.len() {
        for j in i + 1..=lemmas.len() {
            spans.insert(lemmas[i..j].join(" "));
        }
    }
    let rank = |k: &MatchKind| match k {
        MatchKind::NoMatch => 0,
        MatchKind::ValueMatch => 1,
        MatchKind::PartialMatch => 2,
        MatchKind::ExactMatch => 3,
    };
    let strongest = |words: &[String], values: Option<&Vec<String>>, lemma: &str| {
        let words: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        let mut candidates = vec![MatchKind::NoMatch];
        if words.iter().any(|w| w == lemma) {
            candidates.push(MatchKind::PartialMatch);
            if spans.contains(&words.join(" ")) {
                candidates.push(MatchKind::ExactMatch);
            }
        }
        if values.into_iter().flatten().any(|v| cell_words(v).contains(lemma)) {
            candidates.push(MatchKind::ValueMatch);
        }
        candidates.into_iter().max_by_key(rank).unwrap()
    };
    let tables = lemmas
        .iter()
        .map(|l| schema.tables.iter().map(|t| strongest(&t.name_words, None, l)).collect())
        .collect();
    let columns = lemmas
        .iter()
        .map(|l| {
            schema
                .columns
                .iter()
                .map(|c| strongest(&c.name_words, c.cell_values.as_ref(), l))
                .collect()
        })
        .collect();
    (tables, columns)
}

fn cell_words(value: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut word = String::new();
    for ch in value.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else if !word.is_empty() {
            out.insert(std::mem::take(&mut word));
        }
    }
    out
}

/// `(first edge, second edge, shared node)` for every pair of consecutive
/// local edges that is neither a reversal nor a Match-series pair.
pub fn line_edges_oracle(graph: &NodeCentricGraph) -> BTreeSet<((usize, usize), (usize, usize), usize)> {
    let mut out = BTreeSet::new();
    for a in graph.local_edges() {
        for b in graph.local_edges() {
            if a.dst != b.src || a.src == b.dst {
                continue;
            }
            if a.relation.is_match_series() && b.relation.is_match_series() {
                continue;
            }
            out.insert(((a.src, a.dst), (b.src, b.dst), a.dst));
        }
    }
    out
}

/// Random valid graph within the sweep bounds: at most 12 nodes and 40
/// local edges.
pub fn sweep_graph<R: Rng>(rng: &mut R) -> NodeCentricGraph {
    loop {
        let (q, s) = random_instance(rng, InstanceLimits::with_max_nodes(12));
        let g = NodeCentricGraph::build(&q, &s).expect("random instances are valid");
        if g.local_edges().len() <= 40 {
            return g;
        }
    }
}

/// Random instance with mixed casing in schema words and punctuated cell
/// values, so folding and value tokenization are exercised.
pub fn linking_fixture<R: Rng>(rng: &mut R) -> (Question, Schema) {
    let limits = InstanceLimits {
        max_nodes: 16,
        max_tokens: 7,
        max_tables: 3,
        max_columns: 6,
    };
    let (q, mut s) = random_instance(rng, limits);
    let shout = |w: &mut String, rng: &mut R| {
        if rng.random_bool(0.3) {
            *w = w.to_uppercase();
        }
    };
    for t in &mut s.tables {
        t.name_words.iter_mut().for_each(|w| shout(w, rng));
    }
    for c in &mut s.columns {
        c.name_words.iter_mut().for_each(|w| shout(w, rng));
        if rng.random_bool(0.3) {
            let pick = *["Singer-Name", "city,Year", "(age)", "w1!", "COUNTRY  id"].choose(rng).unwrap();
            c.cell_values.get_or_insert_with(Vec::new).push(pick.to_string());
        }
    }
    (q, s)
}
