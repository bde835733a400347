use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use relsql::encoder::Scheme;
use relsql_cli::commands::{self, GradcheckArgs, GraphFormat};
use relsql_cli::{CliError, Outcome};

#[derive(Parser)]
#[command(name = "relsql", version, about = "Relation-aware graph encoding and schema pruning for text-to-SQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Msde,
    Mmc,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Msde => Scheme::Msde,
            SchemeArg::Mmc => Scheme::Mmc,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Export the node-centric graph of one dataset example.
    BuildGraph {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: GraphFormat,
        /// Include the edge-centric line graph.
        #[arg(long)]
        line_graph: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the line-graph construction against brute force on random graphs.
    VerifyLinegraph {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 12)]
        max_nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference check of the encoder and pruning loss gradients.
    Gradcheck {
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        heads: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, value_enum, default_value = "msde")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Train the schema pruning model from a run config.
    TrainPrune {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a pruning checkpoint.
    EvalPrune {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset file; defaults to the held-out split named in the checkpoint.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Parse and replay every query of a corpus through the SQL grammar.
    GrammarCheck {
        /// Dataset file supplying the schemas (and the queries without --corpus).
        #[arg(long)]
        dataset: PathBuf,
        /// JSONL corpus of {"db_id", "sql"} lines.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        min_coverage: f64,
    },
    /// Print the default run config.
    EmitConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::BuildGraph { dataset, index, format, line_graph, out } => {
            commands::build_graph(&dataset, index, format, line_graph, out.as_deref())
        }
        Command::VerifyLinegraph { instances, max_nodes, seed } => {
            commands::verify_linegraph(instances, max_nodes, seed)
        }
        Command::Gradcheck { d, heads, layers, scheme, seed, step, tol } => commands::gradcheck(&GradcheckArgs {
            d,
            heads,
            layers,
            scheme: scheme.into(),
            seed,
            step,
            tolerance: tol,
        }),
        Command::TrainPrune { config, out } => commands::train_prune(&config, out.as_deref()),
        Command::EvalPrune { checkpoint, dataset } => commands::eval_prune(&checkpoint, dataset.as_deref()),
        Command::GrammarCheck { dataset, corpus, min_coverage } => {
            commands::grammar_check(&dataset, corpus.as_deref(), min_coverage)
        }
        Command::EmitConfig { out } => commands::emit_config(out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(outcome) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
