//! Randomly generated examples whose relevance labels follow directly from
//! schema linking: an item is relevant iff some question token links to it
//! by an exact name match or, for columns, a cell-value match.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::PreparedExample;
use crate::relgraph::{link_schema, Column, ColumnType, MatchKind, Question, Schema, Table};

use super::train::PruningExample;
use super::PrunerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticLimits {
    pub max_tables: usize,
    pub max_columns_per_table: usize,
    pub max_filler: usize,
}

impl Default for SyntheticLimits {
    fn default() -> Self {
        SyntheticLimits {
            max_tables: 3,
            max_columns_per_table: 3,
            max_filler: 4,
        }
    }
}

const NOUNS: [&str; 24] = [
    "singer", "concert", "stadium", "song", "album", "artist", "city", "country", "student", "teacher", "course",
    "pet", "airline", "airport", "flight", "name", "age", "year", "price", "title", "genre", "rank", "team", "player",
];
const FILLER: [&str; 12] = ["what", "show", "list", "the", "of", "all", "how", "many", "which", "each", "find", "give"];
const VALUES: [&str; 10] = ["paris", "rock", "gold", "tokyo", "jazz", "blue", "lima", "oslo", "pop", "red"];

fn words(rng: &mut ChaCha8Rng, max: usize) -> Vec<String> {
    let k = rng.random_range(1..=max);
    NOUNS.choose_multiple(rng, k).map(|w| w.to_string()).collect()
}

fn random_schema(rng: &mut ChaCha8Rng, limits: &SyntheticLimits) -> Schema {
    let n_tables = rng.random_range(1..=limits.max_tables);
    let mut tables = Vec::new();
    let mut columns = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while tables.len() < n_tables {
        let t = Table::new(&words(rng, 2));
        if seen.insert(("t", t.identifier())) {
            tables.push(t);
        }
    }
    for t in 0..n_tables {
        let k = rng.random_range(1..=limits.max_columns_per_table);
        let mut made = 0;
        while made < k {
            let mut c = Column::new(&words(rng, 2), t, *ColumnType::ALL.choose(rng).unwrap());
            if !seen.insert(("c", format!("{t}/{}", c.identifier()))) {
                continue;
            }
            if rng.random_bool(0.3) {
                c = c.with_values(&VALUES.choose_multiple(rng, 2).copied().collect::<Vec<_>>());
            }
            columns.push(c);
            made += 1;
        }
    }
    Schema {
        tables,
        columns,
        foreign_keys: vec![],
    }
}

/// `n` examples drawn from `seed`. Questions mention the full names of a
/// few items, single words of others, and some cell values, mixed with
/// filler words.
pub fn separable_dataset(n: usize, seed: u64, limits: SyntheticLimits) -> Result<Vec<PruningExample>, PrunerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let schema = random_schema(&mut rng, &limits);
        let mut tokens: Vec<String> = Vec::new();
        let names: Vec<&Vec<String>> = schema
            .tables
            .iter()
            .map(|t| &t.name_words)
            .chain(schema.columns.iter().map(|c| &c.name_words))
            .collect();
        for name in names {
            match rng.random_range(0..4) {
                0 => tokens.extend(name.iter().cloned()),
                1 => tokens.push(name.choose(&mut rng).unwrap().clone()),
                _ => {}
            }
        }
        for c in &schema.columns {
            if let Some(values) = &c.cell_values {
                if rng.random_bool(0.5) {
                    tokens.push(values.choose(&mut rng).unwrap().clone());
                }
            }
        }
        for _ in 0..rng.random_range(1..=limits.max_filler) {
            let at = rng.random_range(0..=tokens.len());
            tokens.insert(at, FILLER.choose(&mut rng).unwrap().to_string());
        }
        let question = Question::from_words(&tokens)?;
        let linking = link_schema(&question, &schema);
        let n_tables = schema.tables.len();
        let mut labels = vec![0.0; schema.num_items()];
        for q in 0..question.len() {
            for t in 0..n_tables {
                if linking.table(q, t) == MatchKind::ExactMatch {
                    labels[t] = 1.0;
                }
            }
            for c in 0..schema.columns.len() {
                if matches!(linking.column(q, c), MatchKind::ExactMatch | MatchKind::ValueMatch) {
                    labels[n_tables + c] = 1.0;
                }
            }
        }
        if labels.iter().all(|&l| l == 0.0) {
            continue;
        }
        out.push(PruningExample {
            example: PreparedExample::new(question, schema)?,
            labels,
        });
    }
    Ok(out)
}
