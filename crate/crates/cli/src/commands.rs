//! One function per subcommand. Each returns its stdout text and whether
//! the check it performs passed; files are written as side effects.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use relsql::encoder::{EncoderConfig, Scheme};
use relsql::linegraph::{brute_force_line_graph, compose_meta_path, construct_line_graph, map_edge_index};
use relsql::pruner::{
    build_vocab, evaluate_pruning, pipeline_gradient_check, separable_dataset, toy_pruning_example, train_pruning,
    PrunerError, PruningExample, PruningModel, SyntheticLimits,
};
use relsql::relgraph::random::{random_instance, InstanceLimits};
use relsql::relgraph::{NodeCentricGraph, RelationType};
use relsql::sqlgrammar::{constructor_usage, grammar_coverage, parse_corpus, parse_sql, CorpusEntry, GrammarSpec};

use crate::checkpoint::Checkpoint;
use crate::config::{DataConfig, RunConfig};
use crate::dataset::{load_dataset, DatasetError, DatasetFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) => 1,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PrunerError> for CliError {
    fn from(e: PrunerError) -> Self {
        match e {
            PrunerError::InvalidConfig(_) | PrunerError::EmptyDataset | PrunerError::Encoder(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

/// Stdout of a command and whether its check passed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub passed: bool,
}

impl Outcome {
    fn ok(stdout: String) -> Outcome {
        Outcome { stdout, passed: true }
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum GraphFormat {
    Json,
    Dot,
}

/// Serializes the graph of one dataset example, optionally with its line
/// graph: JSON wraps both as `{"graph": ..., "line_graph": ...}`, DOT puts
/// each in its own cluster of one digraph.
pub fn export_graph(
    dataset: &DatasetFile,
    index: usize,
    format: GraphFormat,
    include_line_graph: bool,
) -> Result<String, CliError> {
    if index >= dataset.examples.len() {
        return Err(CliError::Validation(format!(
            "example index {index} out of range for {} examples",
            dataset.examples.len()
        )));
    }
    let graph = NodeCentricGraph::build(&dataset.question(index), dataset.schema(index))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let text = match (format, include_line_graph) {
        (GraphFormat::Json, false) => graph.to_json(),
        (GraphFormat::Json, true) => {
            format!("{{\"graph\":{},\"line_graph\":{}}}", graph.to_json(), construct_line_graph(&graph).to_json())
        }
        (GraphFormat::Dot, false) => graph.to_dot(),
        (GraphFormat::Dot, true) => {
            let body = |dot: String| {
                let lines: Vec<&str> = dot.lines().collect();
                lines[1..lines.len() - 1].iter().map(|l| format!("  {l}\n")).collect::<String>()
            };
            format!(
                "digraph example {{\n  subgraph cluster_nodes {{\n{}  }}\n  subgraph cluster_edges {{\n{}  }}\n}}\n",
                body(graph.to_dot()),
                body(construct_line_graph(&graph).to_dot())
            )
        }
    };
    Ok(if text.ends_with('\n') { text } else { text + "\n" })
}

pub fn build_graph(
    dataset: &Path,
    index: usize,
    format: GraphFormat,
    line_graph: bool,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let text = export_graph(&load_dataset(dataset)?, index, format, line_graph)?;
    match out {
        Some(path) => {
            write(path, &text)?;
            Ok(Outcome::ok(format!("wrote {}\n", path.display())))
        }
        None => Ok(Outcome::ok(text)),
    }
}

/// Compares the line-graph construction with the brute-force oracle on
/// random instances and checks the per-edge invariants.
pub fn verify_linegraph(instances: usize, max_nodes: usize, seed: u64) -> Result<Outcome, CliError> {
    if max_nodes < 3 {
        return Err(CliError::Usage("--max-nodes must be at least 3".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut line_nodes, mut line_edges) = (0, 0);
    let mut failures = Vec::new();
    for instance in 0..instances {
        let (q, s) = random_instance(&mut rng, InstanceLimits::with_max_nodes(max_nodes));
        let graph = NodeCentricGraph::build(&q, &s).map_err(|e| CliError::Internal(e.to_string()))?;
        let lg = construct_line_graph(&graph);
        let oracle = brute_force_line_graph(&graph).map_err(|e| CliError::Validation(e.to_string()))?;
        line_nodes += lg.num_nodes();
        line_edges += lg.edges().len();
        if lg != oracle {
            failures.push(format!("instance {instance}: construction differs from the oracle"));
        }
        for e in graph.local_edges() {
            if map_edge_index(&lg, e.src, e.dst).map(|i| lg.endpoints()[i]) != Ok((e.src, e.dst)) {
                failures.push(format!("instance {instance}: edge ({}, {}) does not round trip", e.src, e.dst));
            }
        }
        for e in lg.edges() {
            let ((s, t), (t2, u)) = (lg.endpoints()[e.from], lg.endpoints()[e.to]);
            let (a, b) = compose_meta_path(&lg, e.from, e.to).expect("edge exists");
            let sound = t == e.connecting_node
                && t2 == e.connecting_node
                && s != u
                && !(a.is_match_series() && b.is_match_series());
            let same_table = (a, b) != (RelationType::CtBelongsTo, RelationType::TcHas)
                || matches!(
                    graph.relation(s, u),
                    RelationType::CcSameTable | RelationType::CcForeignKey | RelationType::CcForeignKeyRev
                );
            if !sound || !same_table {
                failures.push(format!("instance {instance}: line edge {} -> {} violates an invariant", e.from, e.to));
            }
        }
    }
    let mut out = format!(
        "instances {instances}, line nodes {line_nodes}, line edges {line_edges}, mismatches {}\n",
        failures.len()
    );
    for f in &failures {
        let _ = writeln!(out, "{f}");
    }
    Ok(Outcome {
        stdout: out,
        passed: failures.is_empty(),
    })
}

pub struct GradcheckArgs {
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
}

/// Finite-difference check of encode + pruning loss on the toy graph.
pub fn gradcheck(args: &GradcheckArgs) -> Result<Outcome, CliError> {
    let config = EncoderConfig::small(args.d, args.heads, args.layers, args.scheme);
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    if !(args.step > 0.0) {
        return Err(CliError::Usage("--step must be positive".into()));
    }
    let check = match pipeline_gradient_check(config, &toy_pruning_example(), args.seed, args.step) {
        Ok(c) => c,
        Err(e @ PrunerError::NoSmoothPoint { .. }) => {
            return Ok(Outcome {
                stdout: format!("{e}\n"),
                passed: false,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let worst = check.report.worst.as_ref().map_or(String::new(), |(n, i)| format!(" (worst {n}[{i}])"));
    Ok(Outcome {
        stdout: format!(
            "max relative error {:.3e} over {} coordinates{worst}, init seed {}\n",
            check.max_rel_error, check.report.coordinates, check.seed
        ),
        passed: check.max_rel_error < args.tolerance,
    })
}

/// Examples named by a data config, split into (train, held-out).
pub fn load_split(data: &DataConfig, seed: u64) -> Result<(Vec<PruningExample>, Vec<PruningExample>), CliError> {
    let mut examples = match &data.dataset {
        Some(path) => load_dataset(path)?.pruning_examples()?,
        None => separable_dataset(data.synthetic_examples, seed, SyntheticLimits::default())?,
    };
    if data.heldout >= examples.len() {
        return Err(CliError::Validation(format!(
            "heldout {} leaves no training examples out of {}",
            data.heldout,
            examples.len()
        )));
    }
    let heldout = examples.split_off(examples.len() - data.heldout);
    Ok((examples, heldout))
}

fn metrics_json(examples: usize, m: &relsql::pruner::Metrics, loss: f64) -> String {
    format!(
        "{{\"examples\":{examples},\"precision\":{},\"recall\":{},\"f1\":{},\"loss\":{}}}\n",
        m.precision(),
        m.recall(),
        m.f1(),
        loss
    )
}

/// Trains the pruning model, writing `checkpoint.json` and `report.jsonl`
/// to `out` (or the configured output directory). Stdout holds held-out
/// metrics.
pub fn train_prune(config_path: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let config = RunConfig::from_json(&read(config_path)?)
        .map_err(|e| CliError::Validation(format!("config at line {}, column {}: {e}", e.line(), e.column())))?;
    config.encoder.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let (train, heldout) = load_split(&config.data, config.seed)?;
    let vocab = build_vocab(&train, config.data.min_word_count);
    let model = PruningModel::new(config.encoder.clone(), vocab.clone())?;
    let mut store = model.init_params(config.seed)?;
    let report = train_pruning(&model, &mut store, &train, &config.train_config())?;

    let dir: PathBuf = out.map_or_else(|| config.paths.output_dir.clone(), Path::to_path_buf);
    let checkpoint = Checkpoint {
        config: config.clone(),
        vocab,
        params: store.clone(),
    };
    write(&dir.join("checkpoint.json"), &checkpoint.to_json())?;
    write(&dir.join("report.jsonl"), &report.to_jsonl())?;
    let mut stdout = String::new();
    if !heldout.is_empty() {
        let (m, loss) = evaluate_pruning(&model, &store, &heldout, config.pruning.threshold)?;
        stdout.push_str(&metrics_json(heldout.len(), &m, loss));
    }
    let _ = writeln!(stdout, "wrote {}", dir.display());
    Ok(Outcome::ok(stdout))
}

/// Evaluates a checkpoint on a dataset file, or on the held-out split of
/// the data source recorded in the checkpoint.
pub fn eval_prune(checkpoint_path: &Path, dataset: Option<&Path>) -> Result<Outcome, CliError> {
    let checkpoint = Checkpoint::from_json(&read(checkpoint_path)?).map_err(|e| CliError::Validation(e.to_string()))?;
    let examples = match dataset {
        Some(path) => load_dataset(path)?.pruning_examples()?,
        None => load_split(&checkpoint.config.data, checkpoint.config.seed)?.1,
    };
    if examples.is_empty() {
        return Err(CliError::Validation("no examples to evaluate".into()));
    }
    let model = checkpoint.model();
    let (m, loss) = evaluate_pruning(&model, &checkpoint.params, &examples, checkpoint.config.pruning.threshold)?;
    Ok(Outcome::ok(metrics_json(examples.len(), &m, loss)))
}

/// Grammar coverage of a query corpus. Schemas come from the dataset file;
/// without a corpus the dataset's own queries are checked.
pub fn grammar_check(dataset: &Path, corpus: Option<&Path>, min_coverage: f64) -> Result<Outcome, CliError> {
    let file = load_dataset(dataset)?;
    let entries: Vec<CorpusEntry> = match corpus {
        Some(path) => parse_corpus(&read(path)?)
            .map_err(|(line, e)| CliError::Validation(format!("corpus line {line}: {e}")))?,
        None => file
            .examples
            .iter()
            .map(|e| CorpusEntry {
                db_id: e.db_id.clone(),
                sql: e.sql.clone(),
            })
            .collect(),
    };
    let grammar = GrammarSpec::default();
    let report = grammar_coverage(&entries, &file.databases, &grammar);
    let asts: Vec<_> = entries
        .iter()
        .filter_map(|e| parse_sql(&e.sql, file.databases.get(&e.db_id)?).ok())
        .collect();
    let usage: BTreeMap<String, usize> = constructor_usage(&asts);
    let unused: Vec<&str> = grammar.constructor_names().filter(|c| !usage.contains_key(*c)).collect();

    let mut out = format!(
        "covered {}/{} ({:.1}%), mean action length {:.1}, constructors used {}/{}\n",
        report.covered,
        report.total,
        100.0 * report.fraction,
        report.mean_actions,
        usage.len(),
        usage.len() + unused.len()
    );
    if !unused.is_empty() {
        let _ = writeln!(out, "unused constructors: {}", unused.join(", "));
    }
    for f in &report.failures {
        let _ = writeln!(out, "query {} ({}): {:?}: {}", f.index, f.db_id, f.category, f.message);
    }
    Ok(Outcome {
        stdout: out,
        passed: report.fraction >= min_coverage,
    })
}

pub fn emit_config(out: Option<&Path>) -> Result<Outcome, CliError> {
    let text = RunConfig::default().to_json();
    match out {
        Some(path) => {
            write(path, &text)?;
            Ok(Outcome::ok(format!("wrote {}\n", path.display())))
        }
        None => Ok(Outcome::ok(text)),
    }
}
