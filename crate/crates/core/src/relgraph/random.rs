//! Seeded random question/schema instances for oracle sweeps.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{Column, ColumnType, Question, Schema, Table};

#[derive(Clone, Copy, Debug)]
pub struct InstanceLimits {
    pub max_nodes: usize,
    pub max_tokens: usize,
    pub max_tables: usize,
    pub max_columns: usize,
}

impl InstanceLimits {
    pub fn with_max_nodes(max_nodes: usize) -> Self {
        InstanceLimits {
            max_nodes: max_nodes.max(3),
            max_tokens: 4,
            max_tables: 3,
            max_columns: 6,
        }
    }
}

const WORDS: &[&str] = &[
    "singer", "name", "age", "song", "concert", "year", "country", "id", "stadium", "city",
];

fn phrase<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> Vec<String> {
    let len = rng.random_range(1..=max_len);
    (0..len)
        .map(|_| WORDS.choose(rng).unwrap().to_string())
        .collect()
}

/// Draws a valid `(question, schema)` pair whose graph has at most
/// `limits.max_nodes` nodes. Words come from a small shared vocabulary so
/// partial, exact and value matches all occur with useful frequency.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, limits: InstanceLimits) -> (Question, Schema) {
    let budget = limits.max_nodes;
    let nq = rng.random_range(1..=limits.max_tokens.min(budget - 2));
    let nt = rng.random_range(1..=limits.max_tables.min(budget - nq - 1));
    let nc = rng.random_range(1..=limits.max_columns.min(budget - nq - nt));

    let question_words: Vec<String> = (0..nq)
        .map(|_| {
            if rng.random_bool(0.2) {
                format!("w{}", rng.random_range(0..3))
            } else {
                WORDS.choose(rng).unwrap().to_string()
            }
        })
        .collect();
    let question = Question::from_words(&question_words).expect("non-empty question");

    let mut tables: Vec<Table> = Vec::new();
    while tables.len() < nt {
        let t = Table {
            name_words: phrase(rng, 2),
        };
        if tables.iter().all(|o| o.identifier() != t.identifier()) {
            tables.push(t);
        }
    }

    let mut columns: Vec<Column> = Vec::new();
    let mut attempts = 0;
    while columns.len() < nc && attempts < 1000 {
        attempts += 1;
        let owner = if columns.len() < nt {
            columns.len()
        } else {
            rng.random_range(0..nt)
        };
        let mut c = Column {
            name_words: phrase(rng, 2),
            owner_table: owner,
            type_tag: *ColumnType::ALL.choose(rng).unwrap(),
            is_primary: rng.random_bool(0.25),
            cell_values: None,
        };
        if rng.random_bool(0.3) {
            c.cell_values = Some(vec![format!(
                "{} {}",
                WORDS.choose(rng).unwrap(),
                rng.random_range(0..10)
            )]);
        }
        let clash = columns
            .iter()
            .any(|o| o.owner_table == owner && o.identifier() == c.identifier());
        if !clash {
            columns.push(c);
        }
    }

    let mut foreign_keys = Vec::new();
    if columns.len() >= 2 {
        for _ in 0..rng.random_range(0..=2) {
            let a = rng.random_range(0..columns.len());
            let b = rng.random_range(0..columns.len());
            if a != b && !foreign_keys.contains(&(b, a)) && !foreign_keys.contains(&(a, b)) {
                foreign_keys.push((a, b));
            }
        }
    }

    let schema = Schema {
        tables,
        columns,
        foreign_keys,
    };
    debug_assert!(schema.violations().is_empty(), "{:?}", schema.violations());
    (question, schema)
}
