use serde::{Deserialize, Serialize};

use super::EncoderError;

/// How local and non-local relation features enter node attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Mixed static and dynamic embeddings: every head attends to every
    /// node; local pairs use line-graph features, non-local pairs use the
    /// static table.
    Msde,
    /// Multi-head multi-view concatenation: the first half of the heads
    /// attend to 1-hop local neighbours with line-graph features, the rest
    /// attend to all nodes with static features only.
    Mmc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub scheme: Scheme,
    pub dropout: f64,
    pub layer_norm_eps: f64,
    /// FFN inner width as a multiple of `hidden`.
    pub ffn_multiplier: usize,
    /// Word-table width; projected to `hidden` when set.
    #[serde(default)]
    pub word_dim: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: 256,
            heads: 8,
            layers: 8,
            scheme: Scheme::Msde,
            dropout: 0.2,
            layer_norm_eps: 1e-5,
            ffn_multiplier: 4,
            word_dim: None,
        }
    }
}

impl EncoderConfig {
    pub fn small(hidden: usize, heads: usize, layers: usize, scheme: Scheme) -> Self {
        EncoderConfig {
            hidden,
            heads,
            layers,
            scheme,
            dropout: 0.0,
            ..EncoderConfig::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if self.hidden == 0 || self.heads == 0 {
            return bad("hidden size and head count must be positive".into());
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return bad(format!("{} heads do not divide hidden size {}", self.heads, self.hidden));
        }
        if self.scheme == Scheme::Mmc && !self.heads.is_multiple_of(2) {
            return bad(format!("mmc needs an even head count, got {}", self.heads));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.layer_norm_eps > 0.0) {
            return bad("layer_norm_eps must be positive".into());
        }
        if self.ffn_multiplier == 0 || self.word_dim == Some(0) {
            return bad("ffn_multiplier and word_dim must be positive".into());
        }
        Ok(())
    }
}
