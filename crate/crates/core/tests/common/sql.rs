use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relsql::relgraph::{Column, ColumnType, Schema, Table};
use relsql::sqlgrammar::{
    parse_corpus, Agg, ArithOp, CmpOp, ColUnit, Cond, Conj, CorpusEntry, From, Group, Join, Operand, Order, Pred,
    SetOp, Sql, Unit, ValUnit,
};

pub fn data_path(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn toy_databases() -> BTreeMap<String, Schema> {
    let text = std::fs::read_to_string(data_path("toy_dataset.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    serde_json::from_value(doc["databases"].take()).unwrap()
}

pub fn corpus() -> Vec<CorpusEntry> {
    parse_corpus(&std::fs::read_to_string(data_path("grammar_corpus.jsonl")).unwrap()).unwrap()
}

const COLUMN_NAMES: [&str; 6] = ["id", "name", "age", "score", "city", "year"];

/// Two to four tables whose column names overlap, so rendering has to
/// qualify some references.
pub fn random_schema(rng: &mut ChaCha8Rng) -> Schema {
    let n_tables = rng.random_range(2..=4);
    let tables = (0..n_tables).map(|t| Table::new(&[format!("tab{t}")])).collect();
    let mut columns = Vec::new();
    for t in 0..n_tables {
        let k = rng.random_range(1..=4);
        let mut names: Vec<&str> = COLUMN_NAMES.choose_multiple(rng, k).copied().collect();
        names.sort_unstable();
        for name in names {
            columns.push(Column::new(&[name], t, ColumnType::Number));
        }
    }
    Schema {
        tables,
        columns,
        foreign_keys: vec![],
    }
}

fn literal(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => rng.random_range(0..1000).to_string(),
        1 => format!("-{}.5", rng.random_range(0..10)),
        _ => format!("'v{}'", rng.random_range(0..100)),
    }
}

fn col_unit(rng: &mut ChaCha8Rng, schema: &Schema) -> ColUnit {
    let aggs = [Agg::None, Agg::Max, Agg::Min, Agg::Count, Agg::Sum, Agg::Avg, Agg::CountDistinct];
    match rng.random_range(0..10) {
        0 => ColUnit::Star,
        1 => ColUnit::CountStar,
        _ => ColUnit::Column(*aggs.choose(rng).unwrap(), rng.random_range(0..schema.columns.len())),
    }
}

fn val_unit(rng: &mut ChaCha8Rng, schema: &Schema) -> ValUnit {
    if rng.random_bool(0.8) {
        ValUnit::Unary(col_unit(rng, schema))
    } else {
        let ops = [ArithOp::Minus, ArithOp::Plus, ArithOp::Times, ArithOp::Divide];
        ValUnit::Binary(*ops.choose(rng).unwrap(), col_unit(rng, schema), col_unit(rng, schema))
    }
}

fn cond(rng: &mut ChaCha8Rng, schema: &Schema, nest: bool) -> Cond {
    let k = rng.random_range(1..=4);
    let conj = if k > 1 && rng.random_bool(0.5) { Conj::Or } else { Conj::And };
    let cmps = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge, CmpOp::Like, CmpOp::NotLike];
    let preds = (0..k)
        .map(|_| {
            let left = val_unit(rng, schema);
            match rng.random_range(0..10) {
                0 if nest => Pred::In {
                    negated: rng.random_bool(0.5),
                    left,
                    query: Box::new(random_sql_at(rng, schema, false)),
                },
                1 if nest => Pred::Compare {
                    op: *cmps.choose(rng).unwrap(),
                    left,
                    right: Operand::Nested(Box::new(random_sql_at(rng, schema, false))),
                },
                2 | 3 => Pred::Compare {
                    op: *cmps.choose(rng).unwrap(),
                    left,
                    right: Operand::Column(col_unit(rng, schema)),
                },
                _ => Pred::Compare {
                    op: *cmps.choose(rng).unwrap(),
                    left,
                    right: Operand::Literal(literal(rng)),
                },
            }
        })
        .collect();
    Cond { conj, preds }
}

fn unit(rng: &mut ChaCha8Rng, schema: &Schema, nest: bool) -> Unit {
    let n_tables = rng.random_range(1..=schema.tables.len().min(4));
    let tables: Vec<usize> = (0..schema.tables.len()).collect::<Vec<_>>().choose_multiple(rng, n_tables).copied().collect();
    let n_cols = schema.columns.len();
    let joins = (1..n_tables)
        .map(|_| {
            if rng.random_bool(0.7) {
                Join::On(rng.random_range(0..n_cols), rng.random_range(0..n_cols))
            } else {
                Join::Cross
            }
        })
        .collect();
    let select = (0..rng.random_range(1..=6)).map(|_| val_unit(rng, schema)).collect();
    let where_clause = rng.random_bool(0.5).then(|| cond(rng, schema, nest));
    let group = rng.random_bool(0.3).then(|| Group {
        columns: (0..rng.random_range(1..=2)).map(|_| rng.random_range(0..n_cols)).collect(),
        having: rng.random_bool(0.5).then(|| cond(rng, schema, nest)),
    });
    let order = rng.random_bool(0.3).then(|| Order {
        items: (0..rng.random_range(1..=2)).map(|_| val_unit(rng, schema)).collect(),
        descending: rng.random_bool(0.5),
        limit: rng.random_bool(0.5).then(|| rng.random_range(1..20).to_string()),
    });
    Unit {
        distinct: rng.random_bool(0.3),
        select,
        from: From { tables, joins },
        where_clause,
        group,
        order,
    }
}

fn random_sql_at(rng: &mut ChaCha8Rng, schema: &Schema, nest: bool) -> Sql {
    let left = unit(rng, schema, nest);
    let compound = rng.random_bool(0.2).then(|| {
        let op = *[SetOp::Intersect, SetOp::Union, SetOp::Except].choose(rng).unwrap();
        (op, Box::new(unit(rng, schema, nest)))
    });
    Sql { left, compound }
}

/// A random query in the supported subset, with at most one level of
/// subquery nesting.
pub fn random_sql(rng: &mut ChaCha8Rng, schema: &Schema) -> Sql {
    random_sql_at(rng, schema, true)
}
