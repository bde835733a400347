//! Node-graph and line-graph relational attention layers.

use rand::RngCore;

use crate::tensor::init::xavier_uniform;
use crate::tensor::{feed_forward, Bound, EmptyRows, ParamStore, Tensor, TensorError, Var};

use super::{EncoderConfig, EncoderError, GraphLayout, Scheme};

/// Feature dropout on sub-layer outputs; inactive without an RNG.
pub struct Dropout<'r> {
    rate: f64,
    rng: Option<&'r mut dyn RngCore>,
}

impl<'r> Dropout<'r> {
    pub fn off() -> Self {
        Dropout { rate: 0.0, rng: None }
    }

    pub fn train(rate: f64, rng: &'r mut dyn RngCore) -> Self {
        Dropout { rate, rng: Some(rng) }
    }

    pub fn apply<'t>(&mut self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        match &mut self.rng {
            Some(rng) if self.rate > 0.0 => x.dropout(self.rate, &mut **rng),
            _ => Ok(x),
        }
    }
}

/// Everything a layer needs besides its inputs.
#[derive(Clone, Copy)]
pub struct LayerContext<'a, 't> {
    pub params: &'a Bound<'t>,
    pub layer: usize,
    pub config: &'a EncoderConfig,
    pub layout: &'a GraphLayout,
}

impl<'t> LayerContext<'_, 't> {
    fn get(&self, part: &str, name: &str) -> Result<Var<'t>, TensorError> {
        self.params.get(&format!("layer{}.{part}.{name}", self.layer))
    }
}

/// Relation feature sources for node attention: `Z^l`, the non-local
/// table, and the static table `[local table; non-local table]`.
#[derive(Clone, Copy)]
pub struct RelationFeatures<'t> {
    pub dynamic: Var<'t>,
    pub nonlocal: Var<'t>,
    pub statics: Var<'t>,
}

pub(crate) fn init_layer_params(
    cfg: &EncoderConfig,
    layer: usize,
    store: &mut ParamStore,
    rng: &mut dyn RngCore,
) -> Result<(), TensorError> {
    let d = cfg.hidden;
    let ff = cfg.ffn_multiplier * d;
    for (part, proj) in [("node", ["wq", "wk", "wv", "wo"]), ("edge", ["uq", "uk", "uv", "uo"])] {
        let name = |s: &str| format!("layer{layer}.{part}.{s}");
        for p in proj {
            store.insert(name(p), xavier_uniform(d, d, rng))?;
        }
        for ln in ["ln1", "ln2"] {
            store.insert(name(&format!("{ln}.gain")), Tensor::filled(1, d, 1.0))?;
            store.insert(name(&format!("{ln}.bias")), Tensor::zeros(1, d))?;
        }
        store.insert(name("ffn.w1"), xavier_uniform(d, ff, rng))?;
        store.insert(name("ffn.b1"), Tensor::zeros(1, ff))?;
        store.insert(name("ffn.w2"), xavier_uniform(ff, d, rng))?;
        store.insert(name("ffn.b2"), Tensor::zeros(1, d))?;
    }
    Ok(())
}

/// Output projection, residual and normalization, then the FFN block.
fn finish<'t>(
    ctx: &LayerContext<'_, 't>,
    part: &str,
    proj: &str,
    input: Var<'t>,
    aggregate: Var<'t>,
    dropout: &mut Dropout<'_>,
) -> Result<Var<'t>, TensorError> {
    let eps = ctx.config.layer_norm_eps;
    let attended = dropout.apply(aggregate.matmul(ctx.get(part, proj)?)?)?;
    let h = input
        .add(attended)?
        .layer_norm(ctx.get(part, "ln1.gain")?, ctx.get(part, "ln1.bias")?, eps)?;
    let ff = feed_forward(
        h,
        ctx.get(part, "ffn.w1")?,
        ctx.get(part, "ffn.b1")?,
        ctx.get(part, "ffn.w2")?,
        ctx.get(part, "ffn.b2")?,
    )?;
    let ff = dropout.apply(ff)?;
    h.add(ff)?
        .layer_norm(ctx.get(part, "ln2.gain")?, ctx.get(part, "ln2.bias")?, eps)
}

fn check_rows(what: &str, v: Var<'_>, rows: usize, cols: usize) -> Result<(), EncoderError> {
    if v.shape() != (rows, cols) {
        return Err(EncoderError::InconsistentLayout(format!(
            "{what} is {:?}, expected {:?}",
            v.shape(),
            (rows, cols)
        )));
    }
    Ok(())
}

/// One relational attention layer over the node-centric graph.
///
/// Attention logits add the relation feature to the key, and the
/// aggregated values add it again. When `trace` is given, every head's
/// attention matrix is appended to it.
pub fn rgat_node_layer<'t>(
    ctx: &LayerContext<'_, 't>,
    x: Var<'t>,
    features: RelationFeatures<'t>,
    dropout: &mut Dropout<'_>,
    mut trace: Option<&mut Vec<Tensor>>,
) -> Result<Var<'t>, EncoderError> {
    let cfg = ctx.config;
    let layout = ctx.layout;
    let n = layout.num_nodes();
    let (d, heads) = (cfg.hidden, cfg.heads);
    check_rows("X", x, n, d)?;
    check_rows("Z", features.dynamic, layout.num_line_nodes(), d)?;
    let dh = d / heads;
    let scale = (dh as f64).sqrt();

    let q = x.matmul(ctx.get("node", "wq")?)?;
    let k = x.matmul(ctx.get("node", "wk")?)?;
    let v = x.matmul(ctx.get("node", "wv")?)?;
    let dynamic = Var::concat_rows(&[features.dynamic, features.nonlocal])?;
    let (psi_first, mask_first, psi_second) = match cfg.scheme {
        Scheme::Msde => (dynamic.gather_rows(layout.mixed_index().to_vec())?, None, None),
        Scheme::Mmc => (
            dynamic.gather_rows(layout.local_index().to_vec())?,
            Some(layout.local_mask()),
            Some(features.statics.gather_rows(layout.static_index().to_vec())?),
        ),
    };

    let mut outputs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (psi, mask) = match psi_second {
            Some(statics) if h >= heads / 2 => (statics, None),
            _ => (psi_first, mask_first),
        };
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let qh = q.slice_cols(lo, hi)?;
        let kh = k.slice_cols(lo, hi)?;
        let vh = v.slice_cols(lo, hi)?;
        let psi_h = psi.slice_cols(lo, hi)?;
        let logits = qh.matmul(kh.transpose()?)?.add(qh.pair_dot(psi_h, n)?)?;
        let attn = logits.row_softmax_scaled(scale, mask, EmptyRows::Error)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push((*attn.value()).clone());
        }
        outputs.push(attn.matmul(vh)?.add(attn.pair_weighted_sum(psi_h)?)?);
    }
    let aggregate = Var::concat_cols(&outputs)?;
    Ok(finish(ctx, "node", "wo", x, aggregate, dropout)?)
}

/// One relational attention layer over the line graph.
///
/// `phi` holds, per line node, the embedding of its edge's source node; it
/// is added on the query side and to the aggregated values. Line nodes
/// without in-edges aggregate nothing. Passing `None` drops the feature.
pub fn rgat_edge_layer<'t>(
    ctx: &LayerContext<'_, 't>,
    z: Var<'t>,
    phi: Option<Var<'t>>,
    dropout: &mut Dropout<'_>,
    mut trace: Option<&mut Vec<Tensor>>,
) -> Result<Var<'t>, EncoderError> {
    let cfg = ctx.config;
    let layout = ctx.layout;
    let m = layout.num_line_nodes();
    let (d, heads) = (cfg.hidden, cfg.heads);
    check_rows("Z", z, m, d)?;
    if m == 0 {
        return Ok(z);
    }
    if let Some(p) = phi {
        check_rows("phi", p, m, d)?;
    }
    let dh = d / heads;
    let scale = (dh as f64).sqrt();

    let mut q = z.matmul(ctx.get("edge", "uq")?)?;
    if let Some(p) = phi {
        q = q.add(p)?;
    }
    let k = z.matmul(ctx.get("edge", "uk")?)?;
    let v = z.matmul(ctx.get("edge", "uv")?)?;
    let mut outputs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let logits = q.slice_cols(lo, hi)?.matmul(k.slice_cols(lo, hi)?.transpose()?)?;
        let attn = logits.row_softmax_scaled(scale, Some(layout.line_mask()), EmptyRows::Zero)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push((*attn.value()).clone());
        }
        outputs.push(attn.matmul(v.slice_cols(lo, hi)?)?);
    }
    let mut aggregate = Var::concat_cols(&outputs)?;
    if let Some(p) = phi {
        // attention weights sum to one, so the value-side feature is φ itself
        aggregate = aggregate.add(p.mul_rows_const(layout.line_has_in().to_vec())?)?;
    }
    Ok(finish(ctx, "edge", "uo", z, aggregate, dropout)?)
}
