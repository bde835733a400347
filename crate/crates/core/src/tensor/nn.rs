//! Composite layers built from tape primitives.

use super::{TensorError, Var};

/// `relu(x·w1 + b1)·w2 + b2`.
pub fn feed_forward<'t>(
    x: Var<'t>,
    w1: Var<'t>,
    b1: Var<'t>,
    w2: Var<'t>,
    b2: Var<'t>,
) -> Result<Var<'t>, TensorError> {
    x.matmul(w1)?.add_row(b1)?.relu()?.matmul(w2)?.add_row(b2)
}

/// Splits the columns of `x` into `heads` equal contiguous blocks.
pub fn head_split(x: Var<'_>, heads: usize) -> Result<Vec<Var<'_>>, TensorError> {
    let width = x.cols();
    if heads == 0 || !width.is_multiple_of(heads) {
        return Err(TensorError::IndivisibleHeads { width, heads });
    }
    let w = width / heads;
    (0..heads).map(|h| x.slice_cols(h * w, (h + 1) * w)).collect()
}

pub fn head_concat<'t>(parts: &[Var<'t>]) -> Result<Var<'t>, TensorError> {
    Var::concat_cols(parts)
}
