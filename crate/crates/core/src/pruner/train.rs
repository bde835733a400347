use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{Dropout, Encoder, EncoderConfig, PreparedExample, Vocab};
use crate::tensor::{accumulate_grads, adam_step, clip_grad_norm, AdamConfig, GradMap, ParamStore, Tape, Tensor, Var};

use super::head::PruningHead;
use super::PrunerError;

#[derive(Clone, Debug)]
pub struct PruningExample {
    pub example: PreparedExample,
    /// One 0/1 label per schema item, tables first.
    pub labels: Vec<f64>,
}

/// Encoder plus relevance head.
#[derive(Clone, Debug)]
pub struct PruningModel {
    pub encoder: Encoder,
    pub head: PruningHead,
}

impl PruningModel {
    pub fn new(config: EncoderConfig, vocab: Vocab) -> Result<Self, PrunerError> {
        let head = PruningHead::new(config.hidden, config.heads)?;
        Ok(PruningModel {
            encoder: Encoder::new(config, vocab)?,
            head,
        })
    }

    pub fn init_params(&self, seed: u64) -> Result<ParamStore, PrunerError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        self.encoder.init_params(&mut store, &mut rng)?;
        self.head.init_params(&mut store, &mut rng)?;
        Ok(store)
    }

    /// Relevance logits for every schema item of `example`.
    pub fn logits<'t>(
        &self,
        tape: &'t Tape,
        params: &crate::tensor::Bound<'t>,
        example: &PreparedExample,
        dropout: &mut Dropout<'_>,
        trace: Option<&mut Vec<Tensor>>,
    ) -> Result<Var<'t>, PrunerError> {
        let (x, _) = self.encoder.encode(tape, params, example, dropout)?;
        self.head.logits(params, x, example.num_questions(), trace)
    }

    /// Summed binary cross-entropy of the item probabilities.
    pub fn loss<'t>(
        &self,
        tape: &'t Tape,
        params: &crate::tensor::Bound<'t>,
        example: &PruningExample,
        pos_weight: f64,
        dropout: &mut Dropout<'_>,
    ) -> Result<(Var<'t>, Var<'t>), PrunerError> {
        if example.labels.len() != example.example.num_schema_items() {
            return Err(PrunerError::LengthMismatch {
                probs: example.example.num_schema_items(),
                labels: example.labels.len(),
            });
        }
        let logits = self.logits(tape, params, &example.example, dropout, None)?;
        Ok((logits.sigmoid_bce(&example.labels, pos_weight)?, logits))
    }

    /// Item probabilities with dropout off.
    pub fn probabilities(&self, store: &ParamStore, example: &PreparedExample) -> Result<Vec<f64>, PrunerError> {
        let tape = Tape::new();
        let bound = store.bind(&tape);
        let logits = self.logits(&tape, &bound, example, &mut Dropout::off(), None)?;
        Ok(logits.sigmoid()?.value().data().to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Fraction of all steps spent ramping the learning rate up from zero;
    /// it then decays linearly back to zero.
    pub warmup_ratio: f64,
    pub clip_norm: Option<f64>,
    pub threshold: f64,
    /// Weight on the positive-label term of the loss.
    pub pos_weight: f64,
    pub seed: u64,
    /// Run the examples of a batch on the rayon pool.
    pub parallel: bool,
    /// Stop after the first epoch whose F1 reaches this value.
    pub target_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 20,
            adam: AdamConfig {
                lr: 5e-4,
                weight_decay: 1e-4,
                ..AdamConfig::default()
            },
            warmup_ratio: 0.1,
            clip_norm: Some(5.0),
            threshold: 0.5,
            pos_weight: 1.0,
            seed: 0,
            parallel: true,
            target_f1: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PrunerError> {
        let bad = |m: &str| Err(PrunerError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return bad("warmup_ratio must lie in [0, 1]");
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0 < self.threshold && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        if !(self.pos_weight > 0.0) {
            return bad("pos_weight must be positive");
        }
        Ok(())
    }

    /// Learning rate of 0-based step `step` out of `total`.
    pub fn learning_rate(&self, step: usize, total: usize) -> f64 {
        let warm = (self.warmup_ratio * total as f64).ceil() as usize;
        let lr = self.adam.lr;
        if step < warm {
            lr * (step + 1) as f64 / warm as f64
        } else if total > warm {
            lr * (total - step) as f64 / (total - warm) as f64
        } else {
            lr
        }
    }
}

/// Micro-averaged counts over every schema item.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Metrics {
    pub fn add(&mut self, probs: &[f64], labels: &[f64], threshold: f64) {
        for (&p, &y) in probs.iter().zip(labels) {
            match (p >= threshold, y >= 0.5) {
                (true, true) => self.true_positives += 1,
                (true, false) => self.false_positives += 1,
                (false, true) => self.false_negatives += 1,
                (false, false) => {}
            }
        }
    }

    fn ratio(a: usize, b: usize) -> f64 {
        if b == 0 {
            0.0
        } else {
            a as f64 / b as f64
        }
    }

    pub fn precision(&self) -> f64 {
        Self::ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> f64 {
        Self::ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// One line of the training report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over examples of the per-example summed loss.
    pub loss: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub steps: usize,
}

impl TrainReport {
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

struct Pass {
    loss: f64,
    probs: Vec<f64>,
    grads: GradMap,
}

fn forward_backward(
    model: &PruningModel,
    store: &ParamStore,
    example: &PruningExample,
    cfg: &TrainConfig,
    stream: u64,
) -> Result<Pass, PrunerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut dropout = Dropout::train(model.encoder.config.dropout, &mut rng);
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let (loss, logits) = model.loss(&tape, &bound, example, cfg.pos_weight, &mut dropout)?;
    let probs = logits.sigmoid()?.value().data().to_vec();
    let value = loss.value().item();
    let grads = tape.backward(loss)?;
    Ok(Pass {
        loss: value,
        probs,
        grads: bound.gradients(&grads),
    })
}

/// Mini-batch AdamW on the summed per-example loss, averaged over each
/// batch. Every example draws its dropout masks from a stream fixed by the
/// seed and its position in training, so parallel and serial runs agree.
pub fn train_pruning(
    model: &PruningModel,
    store: &mut ParamStore,
    examples: &[PruningExample],
    cfg: &TrainConfig,
) -> Result<TrainReport, PrunerError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(PrunerError::EmptyDataset);
    }
    let batches_per_epoch = examples.len().div_ceil(cfg.batch_size);
    let total = cfg.epochs * batches_per_epoch;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(u64::MAX);
    let mut report = TrainReport::default();
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut metrics = Metrics::default();
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let run = |(slot, &i): (usize, &usize)| {
                let stream = (step * cfg.batch_size + slot) as u64;
                forward_backward(model, store, &examples[i], cfg, stream)
            };
            let passes: Vec<Pass> = if cfg.parallel {
                batch.par_iter().enumerate().map(run).collect::<Result<_, _>>()?
            } else {
                batch.iter().enumerate().map(run).collect::<Result<_, _>>()?
            };
            let mut grads = GradMap::new();
            for (pass, &i) in passes.iter().zip(batch) {
                accumulate_grads(&mut grads, &pass.grads);
                loss_sum += pass.loss;
                metrics.add(&pass.probs, &examples[i].labels, cfg.threshold);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.values_mut().for_each(|g| g.scale_assign(scale));
            if let Some(max) = cfg.clip_norm {
                clip_grad_norm(&mut grads, max);
            }
            let adam = AdamConfig {
                lr: cfg.learning_rate(step, total),
                ..cfg.adam
            };
            adam_step(store, &grads, &adam)?;
            step += 1;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / examples.len() as f64,
            precision: metrics.precision(),
            recall: metrics.recall(),
            f1: metrics.f1(),
        };
        report.epochs.push(record);
        if cfg.target_f1.is_some_and(|t| record.f1 >= t) {
            break;
        }
    }
    report.steps = step;
    Ok(report)
}

/// Metrics and mean loss with dropout off.
pub fn evaluate_pruning(
    model: &PruningModel,
    store: &ParamStore,
    examples: &[PruningExample],
    threshold: f64,
) -> Result<(Metrics, f64), PrunerError> {
    let results: Vec<(Vec<f64>, f64)> = examples
        .par_iter()
        .map(|e| {
            let probs = model.probabilities(store, &e.example)?;
            let loss = super::head::pruning_loss(&probs, &e.labels)?;
            Ok::<_, PrunerError>((probs, loss))
        })
        .collect::<Result<_, _>>()?;
    let mut metrics = Metrics::default();
    let mut loss = 0.0;
    for ((probs, l), e) in results.iter().zip(examples) {
        metrics.add(probs, &e.labels, threshold);
        loss += l;
    }
    Ok((metrics, if examples.is_empty() { 0.0 } else { loss / examples.len() as f64 }))
}

/// Vocabulary over question lemmas and schema name words.
pub fn build_vocab(examples: &[PruningExample], min_count: usize) -> Vocab {
    let words: Vec<String> = examples
        .iter()
        .flat_map(|e| {
            let ex = &e.example;
            ex.question
                .lemmas()
                .iter()
                .chain(ex.schema.tables.iter().flat_map(|t| &t.name_words))
                .chain(ex.schema.columns.iter().flat_map(|c| &c.name_words))
                .cloned()
        })
        .collect();
    Vocab::build(&words, min_count)
}
