//! Dense 2-D tensors, a recorded tape for reverse-mode gradients, and the
//! parameter store and optimizer used for training.

pub mod gradcheck;
pub mod init;
mod matrix;
mod nn;
mod params;
mod tape;

pub use gradcheck::{evaluate, gradient_check, relative_error, GradCheckReport};
pub use matrix::Tensor;
pub use nn::{feed_forward, head_concat, head_split};
pub use params::{
    accumulate_grads, adam_step, clip_grad_norm, grad_norm, AdamConfig, Bound, GradMap, Param, ParamStore,
};
pub use tape::{EmptyRows, Gradients, Tape, Var};


#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("softmax row {row} has no unmasked entry")]
    AllMaskedRow { row: usize },
    #[error("{heads} heads do not divide width {width}")]
    IndivisibleHeads { width: usize, heads: usize },
    #[error("loss is not connected to any differentiable value on this tape")]
    DetachedLoss,
    #[error("loss must be 1x1, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("no gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("two forward passes at the same point disagree ({first} vs {second})")]
    NondeterministicFunction { first: f64, second: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0} needs at least one input")]
    EmptyInput(&'static str),
    #[error("{0}")]
    InvalidArgument(&'static str),
}
