//! Bodies of the fuzz targets, kept here so the checked-in seeds can be
//! replayed by the ordinary test suite. Each takes raw bytes, must never
//! panic on rejected input and asserts a round trip on accepted input.

use std::sync::OnceLock;

use relsql::linegraph::construct_line_graph;
use relsql::relgraph::{NodeCentricGraph, Schema};
use relsql::sqlgrammar::{actions_to_ast, ast_to_actions, parse_corpus, parse_sql, render_sql, Action, GrammarSpec};

use crate::{Checkpoint, DatasetFile, RunConfig};

fn toy_schema() -> &'static Schema {
    static SCHEMA: OnceLock<Schema> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let file = DatasetFile::parse(include_str!("../../../data/toy_dataset.json")).expect("bundled dataset is valid");
        file.databases["concert_singer"].clone()
    })
}

fn grammar() -> &'static GrammarSpec {
    static GRAMMAR: OnceLock<GrammarSpec> = OnceLock::new();
    GRAMMAR.get_or_init(GrammarSpec::default)
}

/// SQL text against the bundled `concert_singer` schema.
pub fn sql_text(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let schema = toy_schema();
    let Ok(ast) = parse_sql(text, schema) else { return };
    let rendered = render_sql(&ast, schema);
    let again = parse_sql(&rendered, schema).unwrap_or_else(|e| panic!("rendered `{rendered}` fails to parse: {e}"));
    assert_eq!(again, ast, "render/parse is not a fixed point for `{rendered}`");
    let actions = ast_to_actions(&ast);
    assert_eq!(actions_to_ast(&actions, grammar(), schema).expect("own actions replay"), ast.masked());
}

/// One action per line, replayed against the bundled schema.
pub fn action_lines(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(actions) = text.lines().map(str::parse).collect::<Result<Vec<Action>, _>>() else { return };
    let Ok(ast) = actions_to_ast(&actions, grammar(), toy_schema()) else { return };
    assert_eq!(ast_to_actions(&ast), actions, "replay is not inverted by emission");
}

pub fn dataset_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = DatasetFile::parse(text) else { return };
    for i in 0..file.examples.len() {
        let graph = NodeCentricGraph::build(&file.question(i), file.schema(i)).expect("validated example builds");
        construct_line_graph(&graph);
    }
    let _ = file.pruning_examples();
}

pub fn graph_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(graph) = NodeCentricGraph::from_json(text) else { return };
    assert_eq!(NodeCentricGraph::from_json(&graph.to_json()).expect("export imports"), graph);
    construct_line_graph(&graph);
}

pub fn checkpoint_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ckpt) = Checkpoint::from_json(text) else { return };
    assert_eq!(Checkpoint::from_json(&ckpt.to_json()).expect("export imports"), ckpt);
}

pub fn run_config_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = RunConfig::from_json(text) else { return };
    assert_eq!(RunConfig::from_json(&config.to_json()).expect("export imports"), config);
    let _ = config.train_config().validate();
    let _ = config.encoder.validate();
}

pub fn corpus_jsonl(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_corpus(text);
}

pub fn grammar_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(grammar) = GrammarSpec::from_json(text) else { return };
    assert_eq!(GrammarSpec::from_json(&grammar.to_json()).expect("export imports"), grammar);
}

/// Target name and body, in the order of `fuzz/fuzz_targets/`.
pub const TARGETS: &[(&str, fn(&[u8]))] = &[
    ("sql_text", sql_text),
    ("action_lines", action_lines),
    ("dataset_json", dataset_json),
    ("graph_json", graph_json),
    ("checkpoint_json", checkpoint_json),
    ("run_config_json", run_config_json),
    ("corpus_jsonl", corpus_jsonl),
    ("grammar_json", grammar_json),
];
