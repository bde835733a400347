//! Dual relational graph attention over the node-centric graph and its line
//! graph.
//!
//! Each layer updates node embeddings `X` with relation features drawn from
//! line-graph node embeddings `Z` (local pairs) or a static table (non-local
//! pairs), and updates `Z` with the embedding of each line edge's connecting
//! node added on the query side. Both halves of a layer read the previous
//! layer's values.

mod config;
mod input;
mod layers;
mod layout;
mod vocab;

use rand::RngCore;

use crate::linegraph::{construct_line_graph, LineGraph};
use crate::relgraph::{NodeCentricGraph, Question, RelGraphError, RelationType, Schema};
use crate::tensor::{Bound, ParamStore, Tape, Tensor, TensorError, Var};

pub use config::{EncoderConfig, Scheme};
pub use input::{attentive_pooling, graph_input};
pub use layers::{rgat_edge_layer, rgat_node_layer, Dropout, LayerContext, RelationFeatures};
pub use layout::{psi_lookup, GraphLayout, PsiView};
pub use vocab::{Vocab, UNK};

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] RelGraphError),
    #[error("non-local tag {0} has no dynamic feature")]
    NonLocalInDynamicView(RelationType),
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("graph and line graph disagree: {0}")]
    InconsistentLayout(String),
}

/// Per-layer, per-head attention matrices of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct AttentionTrace {
    pub node: Vec<Vec<Tensor>>,
    pub edge: Vec<Vec<Tensor>>,
}

/// A question/schema pair with its graphs and attention layout precomputed.
#[derive(Clone, Debug)]
pub struct PreparedExample {
    pub question: Question,
    pub schema: Schema,
    pub graph: NodeCentricGraph,
    pub line_graph: LineGraph,
    pub layout: GraphLayout,
}

impl PreparedExample {
    pub fn new(question: Question, schema: Schema) -> Result<Self, EncoderError> {
        let graph = NodeCentricGraph::build(&question, &schema)?;
        let line_graph = construct_line_graph(&graph);
        let layout = GraphLayout::new(&graph, &line_graph)?;
        Ok(PreparedExample {
            question,
            schema,
            graph,
            line_graph,
            layout,
        })
    }

    pub fn num_questions(&self) -> usize {
        self.question.len()
    }

    pub fn num_schema_items(&self) -> usize {
        self.schema.num_items()
    }
}

/// Encoder hyperparameters together with the vocabulary its word table
/// is indexed by.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub vocab: Vocab,
}

impl Encoder {
    pub fn new(config: EncoderConfig, vocab: Vocab) -> Result<Self, EncoderError> {
        config.validate()?;
        Ok(Encoder { config, vocab })
    }

    /// Adds freshly initialized encoder parameters to `store`.
    pub fn init_params(&self, store: &mut ParamStore, rng: &mut dyn RngCore) -> Result<(), EncoderError> {
        input::init_params(&self.config, self.vocab.len(), store, rng)?;
        for l in 0..self.config.layers {
            layers::init_layer_params(&self.config, l, store, rng)?;
        }
        Ok(())
    }

    /// Runs the input module and all layers; returns `(X, Z)`.
    pub fn encode<'t>(
        &self,
        tape: &'t Tape,
        params: &Bound<'t>,
        example: &PreparedExample,
        dropout: &mut Dropout<'_>,
    ) -> Result<(Var<'t>, Var<'t>), EncoderError> {
        self.encode_traced(tape, params, example, dropout, None)
    }

    /// [`Encoder::encode`] that also records every layer's attention.
    pub fn encode_traced<'t>(
        &self,
        tape: &'t Tape,
        params: &Bound<'t>,
        example: &PreparedExample,
        dropout: &mut Dropout<'_>,
        mut trace: Option<&mut AttentionTrace>,
    ) -> Result<(Var<'t>, Var<'t>), EncoderError> {
        let (mut x, mut z) = graph_input(tape, params, &self.vocab, &self.config, example)?;
        let nonlocal = params.get("embed.nonlocal_relation")?;
        let statics = Var::concat_rows(&[params.get("embed.local_relation")?, nonlocal])?;
        for layer in 0..self.config.layers {
            let ctx = LayerContext {
                params,
                layer,
                config: &self.config,
                layout: &example.layout,
            };
            let features = RelationFeatures {
                dynamic: z,
                nonlocal,
                statics,
            };
            let phi = x.gather_rows(example.layout.line_sources().to_vec())?;
            let (node_trace, edge_trace) = match trace.as_deref_mut() {
                Some(t) => {
                    t.node.push(Vec::new());
                    t.edge.push(Vec::new());
                    (t.node.last_mut(), t.edge.last_mut())
                }
                None => (None, None),
            };
            let x_next = rgat_node_layer(&ctx, x, features, dropout, node_trace)?;
            z = rgat_edge_layer(&ctx, z, Some(phi), dropout, edge_trace)?;
            x = x_next;
        }
        Ok((x, z))
    }
}
