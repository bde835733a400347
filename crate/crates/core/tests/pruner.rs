mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::sql::{corpus, random_schema, random_sql, toy_databases};
use proptest::prelude::*;
use rand::Rng;
use relsql::encoder::Scheme;
use relsql::pruner::{
    average_heads, biaffine_logits, biaffine_score, build_vocab, gold_schema_labels, pruning_loss,
    pruning_probability, question_context, schema_pointer, separable_dataset, train_pruning, PointerHead,
    pipeline_gradient_check, toy_pruning_example, PrunerError, PruningExample, PruningHead, PruningModel, SyntheticLimits,
    TrainConfig, KINK_MARGIN,
};
use relsql::relgraph::Schema;
use relsql::sqlgrammar::{parse_sql, render_sql, Sql};
use relsql::tensor::{ParamStore, Tape, Tensor};

fn head_store(d: usize, heads: usize, seed: u64) -> ParamStore {
    let mut store = ParamStore::new();
    PruningHead::new(d, heads).unwrap().init_params(&mut store, &mut common::rng(seed)).unwrap();
    PointerHead { hidden: d, heads }.init_params(&mut store, &mut common::rng(seed + 1)).unwrap();
    store
}

fn row_sums_are_one(t: &Tensor) -> bool {
    (0..t.rows()).all(|r| (t.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9)
}

#[test]
fn context_with_one_question_node_is_its_projected_value() {
    let (d, h) = (4, 2);
    let store = head_store(d, h, 3);
    let mut rng = common::rng(9);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let xs = tape.constant(common::random_tensor(3, d, &mut rng));
    let xq = tape.constant(common::random_tensor(1, d, &mut rng));
    let mut trace = Vec::new();
    let ctx = question_context(xs, xq, &p, h, Some(&mut trace)).unwrap().value();
    let expect = xq.matmul(p.get("prune.wv").unwrap()).unwrap().matmul(p.get("prune.wo").unwrap()).unwrap().value();
    for r in 0..3 {
        for c in 0..d {
            assert!((ctx.get(r, c) - expect.get(0, c)).abs() < 1e-12);
        }
    }
    assert_eq!(trace.len(), h);
    assert!(trace.iter().all(|g| g.data().iter().all(|&v| v == 1.0)));

    let empty = tape.constant(Tensor::zeros(0, d));
    assert!(matches!(question_context(xs, empty, &p, h, None), Err(PrunerError::EmptyQuestion)));
}

#[test]
fn zero_query_projection_mean_pools_the_question() {
    let (d, h) = (4, 2);
    let mut store = head_store(d, h, 5);
    store.set("prune.wq", Tensor::zeros(d, d)).unwrap();
    let mut rng = common::rng(1);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let xs = tape.constant(common::random_tensor(2, d, &mut rng));
    let xq = tape.constant(common::random_tensor(5, d, &mut rng));
    let mut trace = Vec::new();
    let ctx = question_context(xs, xq, &p, h, Some(&mut trace)).unwrap().value();
    assert!(trace.iter().all(row_sums_are_one));
    let mean = Tensor::filled(1, 5, 0.2);
    let expect = tape
        .constant(mean)
        .matmul(xq)
        .unwrap()
        .matmul(p.get("prune.wv").unwrap())
        .unwrap()
        .matmul(p.get("prune.wo").unwrap())
        .unwrap()
        .value();
    for r in 0..2 {
        for c in 0..d {
            assert!((ctx.get(r, c) - expect.get(0, c)).abs() < 1e-12);
        }
    }
}

#[test]
fn biaffine_hand_values() {
    let u = Tensor::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
    let w = Tensor::zeros(4, 1);
    assert!((biaffine_score(&[1.0, 0.0], &[0.0, 1.0], &u, &w, 0.5).unwrap() - 2.5).abs() < 1e-15);
    assert_eq!(biaffine_score(&[0.0, 0.0], &[0.0, 0.0], &u, &w, -1.25).unwrap(), -1.25);
    let w = Tensor::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let linear = biaffine_score(&[1.0, 1.0], &[1.0, -1.0], &Tensor::zeros(2, 2), &w, 0.5).unwrap();
    assert!((linear - (1.0 + 2.0 + 3.0 - 4.0 + 0.5)).abs() < 1e-15);
    assert!(biaffine_score(&[1.0], &[0.0, 1.0], &u, &w, 0.0).is_err());
}

#[test]
fn tape_biaffine_matches_plain_evaluation() {
    let d = 3;
    let mut rng = common::rng(4);
    let x1 = common::random_tensor(4, d, &mut rng);
    let x2 = common::random_tensor(4, d, &mut rng);
    let u = common::random_tensor(d, d, &mut rng);
    let w = common::random_tensor(2 * d, 1, &mut rng);
    let tape = Tape::new();
    let out = biaffine_logits(
        tape.constant(x1.clone()),
        tape.constant(x2.clone()),
        tape.constant(u.clone()),
        tape.constant(w.clone()),
        tape.constant(Tensor::scalar(0.3)),
    )
    .unwrap()
    .value();
    for r in 0..4 {
        let expect = biaffine_score(x1.row(r), x2.row(r), &u, &w, 0.3).unwrap();
        assert!((out.get(r, 0) - expect).abs() < 1e-12);
    }
}

#[test]
fn probability_range_and_bias_monotonicity() {
    let (d, h) = (4, 2);
    let mut store = ParamStore::new();
    PruningHead::new(d, h).unwrap().init_params(&mut store, &mut common::rng(0)).unwrap();
    let names: Vec<String> = store.names().map(String::from).collect();
    let mut zero = store.clone();
    for n in &names {
        let shape = zero.get(n).unwrap().shape();
        zero.set(n, Tensor::zeros(shape.0, shape.1)).unwrap();
    }
    let mut rng = common::rng(2);
    let xs = common::random_tensor(5, d, &mut rng);
    let xq = common::random_tensor(3, d, &mut rng);
    let probs = |s: &ParamStore| {
        let tape = Tape::new();
        let p = s.bind(&tape);
        let out = pruning_probability(tape.constant(xs.clone()), tape.constant(xq.clone()), &p, h).unwrap();
        out.value().data().to_vec()
    };
    assert!(probs(&zero).iter().all(|&p| p == 0.5));

    let base = probs(&store);
    assert!(base.iter().all(|&p| p > 0.0 && p < 1.0));
    store.set("prune.bias", Tensor::scalar(0.7)).unwrap();
    let raised = probs(&store);
    assert!(base.iter().zip(&raised).all(|(a, b)| b > a));
}

#[test]
fn loss_hand_values() {
    assert!((pruning_loss(&[0.8], &[1.0]).unwrap() - 0.2231435513142097).abs() < 1e-12);
    let n = 7;
    let half = vec![0.5; n];
    let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    assert!((pruning_loss(&half, &labels).unwrap() - n as f64 * 2f64.ln()).abs() < 1e-12);
    assert!(pruning_loss(&labels, &labels).unwrap() < 1e-10);
    assert!(matches!(pruning_loss(&[0.5], &[1.0, 0.0]), Err(PrunerError::LengthMismatch { .. })));
}

proptest! {
    #[test]
    fn loss_is_positive_away_from_the_labels(
        labels in prop::collection::vec(prop::bool::ANY, 1..10),
        offsets in prop::collection::vec(1e-6..0.999f64, 10),
    ) {
        let y: Vec<f64> = labels.iter().map(|&b| b as u8 as f64).collect();
        let p: Vec<f64> = y.iter().zip(&offsets).map(|(&y, &o)| (y - o).abs()).collect();
        let loss = pruning_loss(&p, &y).unwrap();
        prop_assert!(loss > 0.0);
        prop_assert!(loss > pruning_loss(&y, &y).unwrap());
    }
}

#[test]
fn pointer_distribution() {
    let (d, h) = (4, 2);
    let store = head_store(d, h, 8);
    let mut rng = common::rng(3);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let h_att = tape.constant(common::random_tensor(1, d, &mut rng));

    let one = tape.constant(common::random_tensor(1, d, &mut rng));
    assert!((schema_pointer(h_att, one, &p, h, None).unwrap().value().item() - 1.0).abs() < 1e-15);

    let tables = common::random_tensor(5, d, &mut rng);
    let mut trace = Vec::new();
    let dist = schema_pointer(h_att, tape.constant(tables.clone()), &p, h, Some(&mut trace)).unwrap().value();
    assert!(row_sums_are_one(&dist));
    assert_eq!(trace.len(), h);
    assert!(trace.iter().all(row_sums_are_one));

    // Reordering the tables reorders the distribution the same way.
    let perm = [3, 0, 4, 1, 2];
    let mut permuted = Tensor::zeros(5, d);
    for (i, &to) in perm.iter().enumerate() {
        permuted.row_mut(to).copy_from_slice(tables.row(i));
    }
    let moved = schema_pointer(h_att, tape.constant(permuted), &p, h, None).unwrap().value();
    for (i, &to) in perm.iter().enumerate() {
        assert!((moved.get(0, to) - dist.get(0, i)).abs() < 1e-12);
    }

    let none = tape.constant(Tensor::zeros(0, d));
    assert!(matches!(schema_pointer(h_att, none, &p, h, None), Err(PrunerError::NoTables)));
}

#[test]
fn pointer_averages_head_distributions() {
    let tape = Tape::new();
    let a = tape.constant(Tensor::from_rows(&[vec![0.9, 0.1]]).unwrap());
    let b = tape.constant(Tensor::from_rows(&[vec![0.5, 0.5]]).unwrap());
    let avg = average_heads(&[a, b]).unwrap().value();
    assert!((avg.get(0, 0) - 0.7).abs() < 1e-15 && (avg.get(0, 1) - 0.3).abs() < 1e-15);
}

// ---- gold labels -------------------------------------------------------

#[test]
fn labels_of_a_minimal_query() {
    let dbs = toy_databases();
    let s = &dbs["concert_singer"];
    let labels = gold_schema_labels(&parse_sql("SELECT name FROM singer", s).unwrap(), s).unwrap();
    let singer = s.tables.iter().position(|t| t.identifier() == "singer").unwrap();
    let name = (0..s.columns.len())
        .find(|&c| s.columns[c].owner_table == singer && s.columns[c].identifier() == "name")
        .unwrap();
    let on: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1.0).collect();
    assert_eq!(on, [singer, s.tables.len() + name]);

    // A table whose columns are never referenced still counts when it is in FROM.
    let labels = gold_schema_labels(&parse_sql("SELECT count(*) FROM stadium", s).unwrap(), s).unwrap();
    assert_eq!(labels.iter().sum::<f64>(), 1.0);
}

#[test]
fn dangling_references_are_rejected() {
    let dbs = toy_databases();
    let s = &dbs["pets"];
    let mut ast = parse_sql("SELECT fname FROM student", s).unwrap();
    ast.left.from.tables[0] = 40;
    assert!(matches!(gold_schema_labels(&ast, s), Err(PrunerError::DanglingReference(_))));
}

const KEYWORDS: [&str; 28] = [
    "SELECT", "DISTINCT", "FROM", "JOIN", "ON", "WHERE", "AND", "OR", "NOT", "IN", "LIKE", "GROUP", "BY", "HAVING",
    "ORDER", "DESC", "LIMIT", "UNION", "INTERSECT", "EXCEPT", "COUNT", "MAX", "MIN", "SUM", "AVG", "ASC", "AS",
    "value",
];

/// Labels recovered from the rendered text alone: words after FROM/JOIN
/// are tables; other identifiers are columns, bare ones resolved among the
/// tables of the enclosing SELECT.
fn token_scan_labels(sql: &str, schema: &Schema) -> Vec<f64> {
    let mut tokens = Vec::new();
    let mut chars = sql.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if c == '\'' || c == '"' {
            for (_, d) in chars.by_ref() {
                if d == c {
                    break;
                }
            }
        } else if c.is_alphabetic() || c == '_' {
            let mut word = c.to_string();
            while let Some(&(_, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '_' || d == '.' {
                    word.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(word);
        } else if c == '(' || c == ')' {
            tokens.push(c.to_string());
        }
    }

    // Assign every token to a SELECT scope.
    let mut scope_of = Vec::with_capacity(tokens.len());
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let (mut depth, mut next_scope) = (0usize, 0usize);
    for t in &tokens {
        match t.as_str() {
            "(" => depth += 1,
            ")" => {
                depth -= 1;
                while stack.last().is_some_and(|&(_, d)| d > depth) {
                    stack.pop();
                }
            }
            "UNION" | "INTERSECT" | "EXCEPT" => {
                stack.pop();
            }
            "SELECT" => {
                stack.push((next_scope, depth));
                next_scope += 1;
            }
            _ => {}
        }
        scope_of.push(stack.last().map_or(0, |s| s.0));
    }

    let table_id = |name: &str| schema.tables.iter().position(|t| t.identifier() == name).unwrap();
    let mut from: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut labels = vec![0.0; schema.num_items()];
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && (tokens[i - 1] == "FROM" || tokens[i - 1] == "JOIN") {
            let id = table_id(t);
            labels[id] = 1.0;
            from.entry(scope_of[i]).or_default().insert(id);
        }
    }
    for (i, t) in tokens.iter().enumerate() {
        let is_table = i > 0 && (tokens[i - 1] == "FROM" || tokens[i - 1] == "JOIN");
        if is_table || t == "(" || t == ")" || KEYWORDS.contains(&t.as_str()) {
            continue;
        }
        let column = match t.split_once('.') {
            Some((table, col)) => {
                let owner = table_id(table);
                (0..schema.columns.len()).find(|&c| schema.columns[c].owner_table == owner && schema.columns[c].identifier() == col)
            }
            None => {
                let scope = &from[&scope_of[i]];
                let hits: Vec<usize> = (0..schema.columns.len())
                    .filter(|&c| scope.contains(&schema.columns[c].owner_table) && schema.columns[c].identifier() == *t)
                    .collect();
                assert_eq!(hits.len(), 1, "{t} in {sql}");
                Some(hits[0])
            }
        };
        labels[schema.tables.len() + column.unwrap_or_else(|| panic!("{t} in {sql}"))] = 1.0;
    }
    labels
}

#[test]
fn labels_agree_with_token_scan_on_the_corpus() {
    let dbs = toy_databases();
    for entry in corpus() {
        let s = &dbs[&entry.db_id];
        let ast = parse_sql(&entry.sql, s).unwrap();
        let rendered = render_sql(&ast, s);
        assert_eq!(gold_schema_labels(&ast, s).unwrap(), token_scan_labels(&rendered, s), "{rendered}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn labels_agree_with_token_scan_on_random_queries(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let schema = random_schema(&mut rng);
        let ast: Sql = random_sql(&mut rng, &schema);
        let rendered = render_sql(&ast, &schema);
        prop_assert_eq!(gold_schema_labels(&ast, &schema).unwrap(), token_scan_labels(&rendered, &schema), "{}", rendered);
    }
}

// ---- training ----------------------------------------------------------

fn small_model(examples: &[PruningExample], layers: usize) -> PruningModel {
    PruningModel::new(common::config(16, 2, layers, Scheme::Msde), build_vocab(examples, 1)).unwrap()
}

#[test]
fn zero_epochs_leave_parameters_alone() {
    let data = separable_dataset(3, 1, SyntheticLimits::default()).unwrap();
    let model = small_model(&data, 1);
    let mut store = model.init_params(0).unwrap();
    let before = store.clone();
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let report = train_pruning(&model, &mut store, &data, &cfg).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(report.steps, 0);
    assert_eq!(store, before);
    assert!(matches!(train_pruning(&model, &mut store, &[], &cfg), Err(PrunerError::EmptyDataset)));
}

#[test]
fn one_example_is_fitted() {
    let data = separable_dataset(1, 2, SyntheticLimits::default()).unwrap();
    let model = small_model(&data, 1);
    let mut store = model.init_params(0).unwrap();
    let mut cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    cfg.adam.lr = 1e-2;
    let report = train_pruning(&model, &mut store, &data, &cfg).unwrap();
    let last = report.epochs.last().unwrap();
    assert!(last.loss < report.epochs[0].loss, "{report:?}");
    assert_eq!(report.to_jsonl().lines().count(), 30);
}

#[test]
fn training_is_deterministic_and_thread_independent() {
    let data = separable_dataset(6, 4, SyntheticLimits::default()).unwrap();
    let mut model = small_model(&data, 1);
    model.encoder.config.dropout = 0.2;
    let run = |parallel: bool| {
        let mut store = model.init_params(3).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            parallel,
            seed: 11,
            ..TrainConfig::default()
        };
        let report = train_pruning(&model, &mut store, &data, &cfg).unwrap();
        (report.to_jsonl(), store)
    };
    let (a, sa) = run(true);
    let (b, sb) = run(false);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert_eq!(run(true).0, a);
}

#[test]
fn learning_rate_warms_up_then_decays() {
    let cfg = TrainConfig::default();
    let total = 100;
    let lrs: Vec<f64> = (0..total).map(|s| cfg.learning_rate(s, total)).collect();
    assert!((lrs[9] - cfg.adam.lr).abs() < 1e-15);
    assert!(lrs[..10].windows(2).all(|w| w[1] > w[0]));
    assert!(lrs[10..].windows(2).all(|w| w[1] < w[0]));
    assert!(lrs.iter().all(|&l| l > 0.0));
}

#[test]
fn synthetic_labels_follow_linking() {
    let data = separable_dataset(20, 9, SyntheticLimits::default()).unwrap();
    assert_eq!(data.len(), 20);
    let mut rng = common::rng(0);
    for e in &data {
        assert_eq!(e.labels.len(), e.example.num_schema_items());
        assert!(e.labels.contains(&1.0));
        let _ = rng.random::<u8>();
    }
    let again = separable_dataset(20, 9, SyntheticLimits::default()).unwrap();
    assert!(data.iter().zip(&again).all(|(a, b)| a.labels == b.labels && a.example.question == b.example.question));
}

#[test]
fn full_pipeline_gradients_match_finite_differences() {
    let example = toy_pruning_example();
    assert_eq!((example.example.num_questions(), example.example.schema.tables.len(), example.example.schema.columns.len()), (3, 2, 4));
    let check = pipeline_gradient_check(common::config(8, 2, 2, Scheme::Msde), &example, 0, 1e-5).unwrap();
    let model = PruningModel::new(common::config(8, 2, 2, Scheme::Msde), build_vocab(std::slice::from_ref(&example), 1)).unwrap();
    assert_eq!(check.report.coordinates, model.init_params(0).unwrap().num_scalars());
    assert!(check.relu_margin >= KINK_MARGIN);
    println!(
        "seed {} margin {:.2e}: max rel error {:.3e}",
        check.seed, check.relu_margin, check.max_rel_error
    );
    assert!(check.max_rel_error < 1e-4, "{:?} at {:?}", check.max_rel_error, check.report.worst);
}

#[test]
fn mixed_scheme_pipeline_gradients_match_finite_differences() {
    let example = toy_pruning_example();
    let check = pipeline_gradient_check(common::config(8, 2, 2, Scheme::Mmc), &example, 100, 1e-5).unwrap();
    assert!(check.seed >= 100);
    assert!(check.max_rel_error < 1e-4, "{:?} at seed {}", check.max_rel_error, check.seed);
}
