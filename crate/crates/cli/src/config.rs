//! Run configuration shared by the training and evaluation commands.

use std::path::PathBuf;

use relsql::encoder::EncoderConfig;
use relsql::pruner::TrainConfig;
use relsql::tensor::AdamConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningConfig {
    pub threshold: f64,
    pub pos_weight: f64,
}

/// Where examples come from. With no dataset path the synthetic separable
/// generator supplies `synthetic_examples` examples; in both cases the last
/// `heldout` examples are kept for evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    pub synthetic_examples: usize,
    pub heldout: usize,
    pub min_word_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub optimizer: OptimizerConfig,
    pub pruning: PruningConfig,
    pub data: DataConfig,
    pub paths: PathsConfig,
    /// Run the examples of a batch on the thread pool.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            seed: 0,
            encoder: EncoderConfig::default(),
            optimizer: OptimizerConfig {
                lr: train.adam.lr,
                beta1: train.adam.beta1,
                beta2: train.adam.beta2,
                eps: train.adam.eps,
                weight_decay: train.adam.weight_decay,
                warmup_ratio: train.warmup_ratio,
                epochs: train.epochs,
                batch_size: train.batch_size,
                clip_norm: train.clip_norm,
            },
            pruning: PruningConfig {
                threshold: train.threshold,
                pos_weight: train.pos_weight,
            },
            data: DataConfig {
                dataset: None,
                synthetic_examples: 70,
                heldout: 20,
                min_word_count: 1,
            },
            paths: PathsConfig {
                output_dir: PathBuf::from("runs/prune"),
            },
            parallel: true,
        }
    }
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serialization");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn train_config(&self) -> TrainConfig {
        let o = &self.optimizer;
        TrainConfig {
            epochs: o.epochs,
            batch_size: o.batch_size,
            adam: AdamConfig {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                weight_decay: o.weight_decay,
            },
            warmup_ratio: o.warmup_ratio,
            clip_norm: o.clip_norm,
            threshold: self.pruning.threshold,
            pos_weight: self.pruning.pos_weight,
            seed: self.seed,
            parallel: self.parallel,
            target_f1: None,
        }
    }
}
