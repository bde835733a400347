//! Finite-difference check of the whole encode + pruning-loss pipeline.

use super::{build_vocab, PrunerError, PruningExample, PruningModel};
use crate::encoder::{Dropout, EncoderConfig, PreparedExample};
use crate::relgraph::{Column, ColumnType, Question, Schema, Table};
use crate::tensor::{gradient_check, GradCheckReport, ParamStore, Tape};

/// Check points must keep every ReLU input at least this far from zero.
pub const KINK_MARGIN: f64 = 1e-3;

/// Lower bound on the relative-error denominator. At `h = 1e-5` the central
/// difference carries a few `1e-10` of round-off, so gradients much smaller
/// than this can only be compared in absolute terms.
pub const GRADIENT_FLOOR: f64 = 1e-5;

const MAX_DRAWS: usize = 256;

/// Three question tokens, two tables, four columns, one foreign key.
pub fn toy_pruning_example() -> PruningExample {
    let schema = Schema {
        tables: vec![Table::new(&["singer"]), Table::new(&["concert"])],
        columns: vec![
            Column::new(&["singer", "id"], 0, ColumnType::Number).primary(),
            Column::new(&["name"], 0, ColumnType::Text).with_values(&["Joe Sharp"]),
            Column::new(&["concert", "id"], 1, ColumnType::Number).primary(),
            Column::new(&["singer", "id"], 1, ColumnType::Number),
        ],
        foreign_keys: vec![(3, 0)],
    };
    let question = Question::from_words(&["singer", "name", "joe"]).expect("non-empty");
    let example = PreparedExample::new(question, schema).expect("valid toy schema");
    PruningExample {
        example,
        labels: vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    }
}

#[derive(Clone, Debug)]
pub struct PipelineCheck {
    pub report: GradCheckReport,
    /// Initialization seed of the parameters that were checked.
    pub seed: u64,
    pub relu_margin: f64,
    /// Worst `|a - n| / max(|a|, |n|, GRADIENT_FLOOR)` over every coordinate.
    pub max_rel_error: f64,
}

fn loss_value(model: &PruningModel, store: &ParamStore, example: &PruningExample) -> Result<(f64, f64), PrunerError> {
    let tape = Tape::new();
    let params = store.bind(&tape);
    let (loss, _) = model.loss(&tape, &params, example, 1.0, &mut Dropout::off())?;
    Ok((loss.value().item(), tape.relu_margin().unwrap_or(f64::INFINITY)))
}

/// Checks every parameter coordinate of the encoder and pruning head on
/// `example` with dropout off.
///
/// Initialization seeds are tried from `seed` upwards until one puts every
/// ReLU input at least [`KINK_MARGIN`] from zero; a step across a kink
/// measures the jump, not the derivative.
pub fn pipeline_gradient_check(
    config: EncoderConfig,
    example: &PruningExample,
    seed: u64,
    h: f64,
) -> Result<PipelineCheck, PrunerError> {
    let model = PruningModel::new(config, build_vocab(std::slice::from_ref(example), 1))?;
    for draw in 0..MAX_DRAWS as u64 {
        let seed = seed.wrapping_add(draw);
        let store = model.init_params(seed)?;
        let (_, relu_margin) = loss_value(&model, &store, example)?;
        if relu_margin < KINK_MARGIN {
            continue;
        }
        let report = gradient_check(&store, h, None, |s| {
            let tape = Tape::new();
            let params = s.bind(&tape);
            let (loss, _) = model.loss(&tape, &params, example, 1.0, &mut Dropout::off())?;
            let value = loss.value().item();
            let grads = tape.backward(loss)?;
            Ok::<_, PrunerError>((value, params.gradients(&grads)))
        })?;
        let max_rel_error = report
            .entries
            .iter()
            .map(|(_, _, a, n)| (a - n).abs() / a.abs().max(n.abs()).max(GRADIENT_FLOOR))
            .fold(0.0, f64::max);
        return Ok(PipelineCheck {
            report,
            seed,
            relu_margin,
            max_rel_error,
        });
    }
    Err(PrunerError::NoSmoothPoint {
        margin: KINK_MARGIN,
        attempts: MAX_DRAWS,
    })
}
