//! Dataset loading, run configuration, checkpoints and the subcommands of
//! the `relsql` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod fuzz_checks;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use commands::{export_graph, CliError, GraphFormat, Outcome};
pub use config::RunConfig;
pub use dataset::{load_dataset, DatasetError, DatasetExample, DatasetFile};
