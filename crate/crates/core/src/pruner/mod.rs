//! Schema-item relevance prediction used as an auxiliary encoder objective.
//!
//! Each schema node attends over the question nodes to build a context
//! vector; a biaffine form of the node and its context, squashed by a
//! sigmoid, is the probability that the item appears in the gold query.

mod check;
mod head;
mod labels;
mod synthetic;
mod train;

pub use check::{pipeline_gradient_check, toy_pruning_example, PipelineCheck, GRADIENT_FLOOR, KINK_MARGIN};
pub use head::{
    average_heads, biaffine_logits, biaffine_score, pruning_loss, pruning_probability, question_context,
    schema_pointer, PointerHead, PruningHead, LOSS_EPS,
};
pub use labels::gold_schema_labels;
pub use synthetic::{separable_dataset, SyntheticLimits};
pub use train::{
    build_vocab, evaluate_pruning, train_pruning, EpochRecord, Metrics, PruningExample, PruningModel, TrainConfig, TrainReport,
};

use crate::encoder::EncoderError;
use crate::relgraph::RelGraphError;
use crate::sqlgrammar::SqlError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum PrunerError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Graph(#[from] RelGraphError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("question has no nodes to attend over")]
    EmptyQuestion,
    #[error("{probs} probabilities but {labels} labels")]
    LengthMismatch { probs: usize, labels: usize },
    #[error("query references {0}, which is not in the schema")]
    DanglingReference(String),
    #[error("pointer needs at least one table")]
    NoTables,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("no check point with every ReLU input at least {margin} from zero in {attempts} draws")]
    NoSmoothPoint { margin: f64, attempts: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}
