//! Feeding the symbolic executor's traces back into distributed training
//! as per-step field supervision.

use crate::distributed::{train_end_to_end, DistributedModel, FieldLabels, TrainOptions, TrainReport};
use crate::error::ModelError;
use crate::parallel::{par_map, seq_map};
use crate::sample::Sample;
use crate::symbolic::decode::decode_greedy_trace;
use crate::symbolic::predictor::PredictorModel;
use crate::trace::OperatorKind;

/// Field labels decoded from the symbolic policy for one sample, or `None`
/// when decoding does not produce a trace of the expected shape (wrong
/// length, or not ending in `select_value`); such samples fall back to the
/// plain denotation loss.
pub fn decode_labels(
    symbolic: &PredictorModel,
    sample: &Sample,
    exec_steps: usize,
) -> Option<FieldLabels> {
    let trace = decode_greedy_trace(
        symbolic,
        &sample.query,
        &sample.table,
        crate::trace::MAX_STEPS,
    )
    .ok()?;
    let steps = trace.executable_steps();
    let n = sample.query_type.n_steps();
    if steps.len() != n || steps[n - 1].op != OperatorKind::SelectValue {
        return None;
    }
    let mut labels = FieldLabels { steps: vec![None; exec_steps], answer: None };
    for (t, step) in steps.iter().take(n - 1).enumerate() {
        if t < exec_steps {
            labels.steps[t] = step.field;
        }
    }
    labels.answer = steps[n - 1].field;
    Some(labels)
}

#[derive(Debug, Clone)]
pub struct FeedbackReport {
    /// Samples whose decoded trace had the expected shape.
    pub usable_labels: usize,
    pub total: usize,
    pub train: TrainReport,
}

/// Trains the distributed model with `J = J_denotation + lambda · J_fields`
/// where the field labels come from greedy decoding of a trained symbolic
/// model.
pub fn feedback_train(
    distributed: &mut DistributedModel,
    train: &[Sample],
    valid: &[Sample],
    symbolic: &PredictorModel,
    opts: &TrainOptions,
) -> Result<FeedbackReport, ModelError> {
    let exec_steps = distributed.config.exec_steps;
    let one = |s: &Sample| decode_labels(symbolic, s, exec_steps);
    let decoded: Vec<Option<FieldLabels>> = if opts.parallel {
        par_map(train, one)
    } else {
        seq_map(train, one)
    };
    let usable = decoded.iter().filter(|l| l.is_some()).count();
    let labels: Vec<FieldLabels> =
        decoded.into_iter().map(|l| l.unwrap_or_default()).collect();

    let report = train_end_to_end(distributed, train, valid, Some(&labels), opts)?;
    Ok(FeedbackReport { usable_labels: usable, total: train.len(), train: report })
}
