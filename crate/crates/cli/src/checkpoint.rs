//! Trained pruning models on disk.
//!
//! A checkpoint is one JSON object:
//! `{"version": 1, "config": RunConfig, "vocab": [word, ...],
//!   "params": {name: {"shape": [rows, cols], "values": [row-major f64]}}}`.
//! Optimizer moments are not stored; a loaded store starts fresh ones.

use std::collections::BTreeMap;

use relsql::encoder::Vocab;
use relsql::pruner::PruningModel;
use relsql::tensor::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredTensor {
    shape: (usize, usize),
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u32,
    config: RunConfig,
    vocab: Vocab,
    params: BTreeMap<String, StoredTensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub vocab: Vocab,
    pub params: ParamStore,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("malformed checkpoint at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint does not fit its model: {0}")]
    Mismatch(String),
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let params = self
            .params
            .iter()
            .map(|(name, t)| {
                (
                    name.to_string(),
                    StoredTensor {
                        shape: t.shape(),
                        values: t.data().to_vec(),
                    },
                )
            })
            .collect();
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params,
        };
        serde_json::to_string(&file).expect("checkpoint serialization")
    }

    /// Parses a checkpoint and checks every parameter against the shapes
    /// its own config and vocabulary imply.
    pub fn from_json(text: &str) -> Result<Checkpoint, CheckpointError> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| CheckpointError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(file.version));
        }
        let model = PruningModel::new(file.config.encoder.clone(), file.vocab.clone())
            .map_err(|e| CheckpointError::Mismatch(e.to_string()))?;
        // The layers, the five square head matrices and the word table alone
        // need this many values; refuse before allocating a model the file
        // cannot possibly fill.
        let enc = &file.config.encoder;
        let floor = (enc.hidden as u128).pow(2) * (enc.layers as u128 + 5)
            + file.vocab.len() as u128 * enc.word_dim.unwrap_or(enc.hidden) as u128;
        let stored: u128 = file.params.values().map(|t| t.values.len() as u128).sum();
        if stored < floor {
            return Err(CheckpointError::Mismatch(format!("{stored} values stored, the config needs at least {floor}")));
        }
        let expected = model.init_params(0).map_err(|e| CheckpointError::Mismatch(e.to_string()))?;
        let mut params = ParamStore::new();
        for (name, stored) in file.params {
            let Some(want) = expected.get(&name) else {
                return Err(CheckpointError::Mismatch(format!("unexpected parameter `{name}`")));
            };
            if want.shape() != stored.shape {
                return Err(CheckpointError::Mismatch(format!(
                    "`{name}` is {:?}, expected {:?}",
                    stored.shape,
                    want.shape()
                )));
            }
            let (r, c) = stored.shape;
            let tensor = Tensor::from_vec(r, c, stored.values).map_err(|e| CheckpointError::Mismatch(format!("`{name}`: {e}")))?;
            if !tensor.is_finite() {
                return Err(CheckpointError::Mismatch(format!("`{name}` holds non-finite values")));
            }
            params.insert(name, tensor).expect("names are unique map keys");
        }
        if let Some(missing) = expected.names().find(|n| params.get(n).is_none()) {
            return Err(CheckpointError::Mismatch(format!("missing parameter `{missing}`")));
        }
        Ok(Checkpoint {
            config: file.config,
            vocab: file.vocab,
            params,
        })
    }

    pub fn model(&self) -> PruningModel {
        PruningModel::new(self.config.encoder.clone(), self.vocab.clone()).expect("validated at load")
    }
}
