use rand::RngCore;

use crate::tensor::init::xavier_uniform;
use crate::tensor::{Bound, EmptyRows, ParamStore, Tensor, TensorError, Var};

use super::PrunerError;

/// Probability clamp used by [`pruning_loss`].
pub const LOSS_EPS: f64 = 1e-12;

/// Shapes of the relevance head; parameters live under `prune.*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PruningHead {
    pub hidden: usize,
    pub heads: usize,
}

impl PruningHead {
    pub fn new(hidden: usize, heads: usize) -> Result<Self, PrunerError> {
        if heads == 0 || !hidden.is_multiple_of(heads) {
            return Err(TensorError::IndivisibleHeads { width: hidden, heads }.into());
        }
        Ok(PruningHead { hidden, heads })
    }

    pub fn init_params(&self, store: &mut ParamStore, rng: &mut dyn RngCore) -> Result<(), PrunerError> {
        let d = self.hidden;
        for name in ["prune.wq", "prune.wk", "prune.wv", "prune.wo", "prune.bilinear"] {
            store.insert(name, xavier_uniform(d, d, rng))?;
        }
        store.insert("prune.linear", xavier_uniform(2 * d, 1, rng))?;
        store.insert("prune.bias", Tensor::zeros(1, 1))?;
        Ok(())
    }

    /// Relevance logits (one row per schema item) for node embeddings
    /// ordered question nodes first.
    pub fn logits<'t>(
        &self,
        params: &Bound<'t>,
        x: Var<'t>,
        num_questions: usize,
        trace: Option<&mut Vec<Tensor>>,
    ) -> Result<Var<'t>, PrunerError> {
        let n = x.rows();
        if num_questions == 0 {
            return Err(PrunerError::EmptyQuestion);
        }
        if num_questions > n {
            return Err(TensorError::IndexOutOfRange { index: num_questions, len: n }.into());
        }
        let xq = x.gather_rows((0..num_questions).collect())?;
        let xs = x.gather_rows((num_questions..n).collect())?;
        let context = question_context(xs, xq, params, self.heads, trace)?;
        biaffine_logits(xs, context, params.get("prune.bilinear")?, params.get("prune.linear")?, params.get("prune.bias")?)
    }
}

/// Per schema row, multi-head attention over the question rows followed by
/// the output projection. Attention matrices are appended to `trace`.
pub fn question_context<'t>(
    xs: Var<'t>,
    xq: Var<'t>,
    params: &Bound<'t>,
    heads: usize,
    mut trace: Option<&mut Vec<Tensor>>,
) -> Result<Var<'t>, PrunerError> {
    if xq.rows() == 0 {
        return Err(PrunerError::EmptyQuestion);
    }
    let d = xs.cols();
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(TensorError::IndivisibleHeads { width: d, heads }.into());
    }
    let dh = d / heads;
    let q = xs.matmul(params.get("prune.wq")?)?;
    let k = xq.matmul(params.get("prune.wk")?)?;
    let v = xq.matmul(params.get("prune.wv")?)?;
    let mut outputs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let logits = q.slice_cols(lo, hi)?.matmul(k.slice_cols(lo, hi)?.transpose()?)?;
        let gamma = logits.row_softmax_scaled((dh as f64).sqrt(), None, EmptyRows::Error)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push((*gamma.value()).clone());
        }
        outputs.push(gamma.matmul(v.slice_cols(lo, hi)?)?);
    }
    Ok(Var::concat_cols(&outputs)?.matmul(params.get("prune.wo")?)?)
}

/// Row-wise `x1 U x2ᵀ + [x1; x2] W + b` as an `n × 1` column.
pub fn biaffine_logits<'t>(
    x1: Var<'t>,
    x2: Var<'t>,
    bilinear: Var<'t>,
    linear: Var<'t>,
    bias: Var<'t>,
) -> Result<Var<'t>, PrunerError> {
    let quadratic = x1.matmul(bilinear)?.row_dot(x2)?;
    let affine = Var::concat_cols(&[x1, x2])?.matmul(linear)?;
    Ok(quadratic.add(affine)?.add_row(bias)?)
}

/// The biaffine form on plain vectors.
pub fn biaffine_score(x1: &[f64], x2: &[f64], bilinear: &Tensor, linear: &Tensor, bias: f64) -> Result<f64, PrunerError> {
    let d = x1.len();
    if x2.len() != d || bilinear.shape() != (d, d) || linear.shape() != (2 * d, 1) {
        return Err(TensorError::ShapeMismatch {
            op: "biaffine_score",
            left: (d, x2.len()),
            right: bilinear.shape(),
        }
        .into());
    }
    let mut total = bias;
    for i in 0..d {
        for j in 0..d {
            total += x1[i] * bilinear.get(i, j) * x2[j];
        }
        total += x1[i] * linear.get(i, 0) + x2[i] * linear.get(d + i, 0);
    }
    Ok(total)
}

/// Sigmoid of the biaffine score of each schema row and its question context.
pub fn pruning_probability<'t>(
    xs: Var<'t>,
    xq: Var<'t>,
    params: &Bound<'t>,
    heads: usize,
) -> Result<Var<'t>, PrunerError> {
    let context = question_context(xs, xq, params, heads, None)?;
    let logits = biaffine_logits(xs, context, params.get("prune.bilinear")?, params.get("prune.linear")?, params.get("prune.bias")?)?;
    Ok(logits.sigmoid()?)
}

/// Summed binary cross-entropy with probabilities clamped to
/// `[LOSS_EPS, 1 - LOSS_EPS]`.
pub fn pruning_loss(probs: &[f64], labels: &[f64]) -> Result<f64, PrunerError> {
    if probs.len() != labels.len() {
        return Err(PrunerError::LengthMismatch {
            probs: probs.len(),
            labels: labels.len(),
        });
    }
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum())
}

/// Table-copy attention parameters, `pointer.wq` and `pointer.wk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointerHead {
    pub hidden: usize,
    pub heads: usize,
}

impl PointerHead {
    pub fn init_params(&self, store: &mut ParamStore, rng: &mut dyn RngCore) -> Result<(), PrunerError> {
        store.insert("pointer.wq", xavier_uniform(self.hidden, self.hidden, rng))?;
        store.insert("pointer.wk", xavier_uniform(self.hidden, self.hidden, rng))?;
        Ok(())
    }
}

/// Mean of equally shaped probability rows.
pub fn average_heads<'t>(dists: &[Var<'t>]) -> Result<Var<'t>, PrunerError> {
    let Some(first) = dists.first() else {
        return Err(TensorError::EmptyInput("average_heads").into());
    };
    let mut sum = *first;
    for d in &dists[1..] {
        sum = sum.add(*d)?;
    }
    Ok(sum.scale(1.0 / dists.len() as f64)?)
}

/// Distribution over tables for one decoder state `h_att` (`1 × d`): the
/// average over heads of softmax((h W_q)(X_t W_k)ᵀ). Per-head
/// distributions are appended to `trace`.
pub fn schema_pointer<'t>(
    h_att: Var<'t>,
    tables: Var<'t>,
    params: &Bound<'t>,
    heads: usize,
    mut trace: Option<&mut Vec<Tensor>>,
) -> Result<Var<'t>, PrunerError> {
    if tables.rows() == 0 {
        return Err(PrunerError::NoTables);
    }
    let d = h_att.cols();
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(TensorError::IndivisibleHeads { width: d, heads }.into());
    }
    let dh = d / heads;
    let q = h_att.matmul(params.get("pointer.wq")?)?;
    let k = tables.matmul(params.get("pointer.wk")?)?;
    let mut dists = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let logits = q.slice_cols(lo, hi)?.matmul(k.slice_cols(lo, hi)?.transpose()?)?;
        let zeta = logits.row_softmax_scaled(1.0, None, EmptyRows::Error)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push((*zeta.value()).clone());
        }
        dists.push(zeta);
    }
    average_heads(&dists)
}

