//! End-to-end training of the distributed executor from denotations,
//! optionally with per-step field supervision, plus label extraction for
//! the symbolic side.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;

use super::model::{denotation_cell, DistributedForward, DistributedModel};
use crate::datagen::derive_seed;
use crate::error::ModelError;
use crate::nn::{adadelta_step, Gradients, Target, DEFAULT_EPS, DEFAULT_RHO};
use crate::parallel::{par_map, seq_map};
use crate::sample::Sample;
use crate::trace::OperatorKind;

/// Field supervision for one sample: one optional label per execution
/// layer, plus an optional answer-column label applied to the answer
/// layer's field marginal.
#[derive(Debug, Clone, Default)]
pub struct FieldLabels {
    pub steps: Vec<Option<usize>>,
    pub answer: Option<usize>,
}

impl FieldLabels {
    /// Labels taken from a gold trace: the non-final steps supervise the
    /// matching execution layers, the final `select_value` field supervises
    /// the answer column.
    pub fn from_gold_trace(sample: &Sample, exec_steps: usize) -> Self {
        let steps_src = sample.gold_trace.executable_steps();
        let mut steps = vec![None; exec_steps];
        for (t, step) in steps_src.iter().take(steps_src.len().saturating_sub(1)).enumerate() {
            if t < exec_steps {
                steps[t] = step.field;
            }
        }
        let answer = steps_src
            .last()
            .filter(|s| s.op == OperatorKind::SelectValue)
            .and_then(|s| s.field);
        FieldLabels { steps, answer }
    }
}

/// Knobs for one training run.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    /// Print one line per epoch to stderr.
    pub progress: bool,
    /// Fan batches out over the thread pool. Output is identical either
    /// way; gradients are reduced in sample order.
    pub parallel: bool,
    /// Append `epoch,train_loss,valid_denotation_acc` lines here.
    pub metrics_csv: Option<PathBuf>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 40,
            batch_size: 32,
            lambda: 0.0,
            seed: 1,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            progress: false,
            parallel: true,
            metrics_csv: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_denotation_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_valid_acc: f64,
}

/// Loss of one sample under the current parameters: denotation
/// cross-entropy plus `lambda` times the field-attention cross-entropy
/// where labels are present.
pub fn sample_loss_and_grads(
    model: &DistributedModel,
    sample: &Sample,
    lambda: f64,
    labels: Option<&FieldLabels>,
    want_grads: bool,
) -> (f64, Option<Gradients>) {
    let mut fwd = model.forward(&sample.table, &sample.query).expect("non-empty query");
    let target = denotation_cell(&sample.table, &sample.denotation)
        .expect("denotation must locate a cell in its table");
    let mut terms = vec![fwd.tape.cross_entropy_logits(fwd.answer_logits, target)];

    if lambda > 0.0 {
        if let Some(labels) = labels {
            let mut field_terms = Vec::new();
            for (t, label) in labels.steps.iter().enumerate() {
                if let (Some(label), true) = (label, t < fwd.steps.len()) {
                    field_terms.push(
                        fwd.tape.cross_entropy_logits(fwd.steps[t].field_logits, *label),
                    );
                }
            }
            if let Some(answer_col) = labels.answer {
                let (_, marginal) = fwd.answer_marginal_nodes();
                field_terms
                    .push(fwd.tape.cross_entropy_probs(marginal, Target::Index(answer_col)));
            }
            if !field_terms.is_empty() {
                let fields_loss = fwd.tape.add_scalars(&field_terms);
                let scaled = fwd.tape.scale(fields_loss, lambda);
                terms.push(scaled);
            }
        }
    }

    let loss = fwd.tape.add_scalars(&terms);
    let loss_value = fwd.tape.value(loss).as_scalar();
    let grads = want_grads.then(|| fwd.tape.backward(loss));
    (loss_value, grads)
}

/// Argmax answer cell (flat row-major index) for one sample.
pub fn predict_cell(model: &DistributedModel, sample: &Sample) -> usize {
    let fwd = model.forward(&sample.table, &sample.query).expect("non-empty query");
    let probs = fwd.answer_probs();
    crate::symbolic::decode::argmax(&probs)
}

/// Whether the argmax answer cell holds the gold denotation value.
pub fn denotation_correct(model: &DistributedModel, sample: &Sample) -> bool {
    let idx = predict_cell(model, sample);
    let cols = sample.table.n_cols();
    sample.table.rows[idx / cols][idx % cols] == sample.denotation
}

fn denotation_accuracy(model: &DistributedModel, samples: &[Sample], parallel: bool) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits: Vec<bool> = if parallel {
        par_map(samples, |s| denotation_correct(model, s))
    } else {
        seq_map(samples, |s| denotation_correct(model, s))
    };
    hits.iter().filter(|&&b| b).count() as f64 / samples.len() as f64
}

/// Minimizes `J = J_denotation + lambda · J_fields` with AdaDelta,
/// reporting per-epoch validation denotation accuracy and restoring the
/// best-validation parameters at the end.
pub fn train_end_to_end(
    model: &mut DistributedModel,
    train: &[Sample],
    valid: &[Sample],
    labels: Option<&[FieldLabels]>,
    opts: &TrainOptions,
) -> Result<TrainReport, ModelError> {
    if opts.lambda > 0.0 {
        match labels {
            None => return Err(ModelError::MissingFieldLabels),
            Some(l) if l.len() != train.len() => {
                return Err(ModelError::LabelCountMismatch {
                    got: l.len(),
                    expected: train.len(),
                })
            }
            _ => {}
        }
    }

    let mut csv = match &opts.metrics_csv {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "epoch,train_loss,valid_denotation_acc")?;
            Some(f)
        }
        None => None,
    };

    let mut report = TrainReport { epochs: Vec::new(), best_epoch: 0, best_valid_acc: f64::MIN };
    let mut best_params = model.store.named_tensors();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..opts.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0xD15, epoch as u64));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let eval_one = |&i: &usize| {
                let sample_labels = labels.map(|l| &l[i]);
                sample_loss_and_grads(model, &train[i], opts.lambda, sample_labels, true)
            };
            let results: Vec<(f64, Option<Gradients>)> = if opts.parallel {
                par_map(batch, eval_one)
            } else {
                seq_map(batch, eval_one)
            };

            let mut total = Gradients::zeros(&model.store);
            for (loss, grads) in results {
                loss_sum += loss;
                total.add_assign(&grads.expect("gradients requested"));
            }
            total.scale(1.0 / batch.len() as f64);
            adadelta_step(&mut model.store, &total, opts.rho, opts.eps);
        }

        let train_loss = loss_sum / train.len().max(1) as f64;
        let valid_acc = denotation_accuracy(model, valid, opts.parallel);
        if valid_acc > report.best_valid_acc {
            report.best_valid_acc = valid_acc;
            report.best_epoch = epoch;
            best_params = model.store.named_tensors();
        }
        report.epochs.push(EpochMetrics { epoch, train_loss, valid_denotation_acc: valid_acc });
        if let Some(f) = csv.as_mut() {
            writeln!(f, "{epoch},{train_loss:.6},{valid_acc:.6}")?;
        }
        if opts.progress {
            eprintln!(
                "[distributed] epoch {epoch:>3}  train_loss {train_loss:.4}  valid_acc {valid_acc:.4}"
            );
        }
    }

    model
        .store
        .load_named_tensors(&best_params)
        .map_err(ModelError::Checkpoint)?;
    Ok(report)
}

/// Field choices read off a trained model: the argmax attention per
/// execution layer and the argmax of the answer layer's field marginal.
/// Ties break to the lowest index.
#[derive(Debug, Clone)]
pub struct ExtractedLabels {
    pub step_fields: Vec<usize>,
    pub answer_field: usize,
}

pub fn extract_field_labels(model: &DistributedModel, sample: &Sample) -> ExtractedLabels {
    let fwd = model.forward(&sample.table, &sample.query).expect("non-empty query");
    extract_from_forward(&fwd)
}

pub fn extract_from_forward(fwd: &DistributedForward<'_>) -> ExtractedLabels {
    let step_fields = (0..fwd.steps.len())
        .map(|t| crate::symbolic::decode::argmax(fwd.field_probs(t)))
        .collect();
    let marginal = super::model::field_marginal_of(&fwd.answer_probs(), fwd.fields);
    ExtractedLabels {
        step_fields,
        answer_field: crate::symbolic::decode::argmax(&marginal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig, Schema};
    use crate::distributed::model::DistributedConfig;
    use crate::table::Table;

    fn corpus(n: usize) -> Vec<Sample> {
        let config = GenConfig { train: n, valid: 0, test: 0, ..GenConfig::default() };
        generate_dataset(&config, &Schema::default()).unwrap().train
    }

    #[test]
    fn lambda_without_labels_is_a_contract_error() {
        let samples = corpus(4);
        let mut model = DistributedModel::new(&samples, DistributedConfig::tiny(), 1);
        let opts = TrainOptions { epochs: 1, lambda: 0.5, ..TrainOptions::default() };
        assert!(matches!(
            train_end_to_end(&mut model, &samples, &samples, None, &opts),
            Err(ModelError::MissingFieldLabels)
        ));
    }

    #[test]
    fn gold_labels_align_steps_and_answer() {
        let samples = corpus(40);
        for s in &samples {
            let labels = FieldLabels::from_gold_trace(s, 4);
            let steps = s.gold_trace.executable_steps();
            let n = steps.len();
            for t in 0..n - 1 {
                assert_eq!(labels.steps[t], steps[t].field);
            }
            for t in n - 1..4 {
                assert_eq!(labels.steps[t], None);
            }
            assert_eq!(labels.answer, steps[n - 1].field);
        }
    }

    #[test]
    fn column_shuffle_leaves_sample_loss_unchanged() {
        let samples = corpus(3);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 5);
        let s = &samples[0];
        let col_perm = vec![4, 2, 9, 0, 1, 7, 3, 8, 6, 5];
        let fields = col_perm.iter().map(|&c| s.table.fields[c].clone()).collect();
        let rows = s
            .table
            .rows
            .iter()
            .map(|r| col_perm.iter().map(|&c| r[c].clone()).collect())
            .collect();
        let mut shuffled = s.clone();
        shuffled.table = Table::new(fields, rows).unwrap();

        let (a, _) = sample_loss_and_grads(&model, s, 0.0, None, false);
        let (b, _) = sample_loss_and_grads(&model, &shuffled, 0.0, None, false);
        assert!((a - b).abs() < 1e-9, "loss changed under column shuffle: {a} vs {b}");
    }

    #[test]
    fn extracted_labels_use_lowest_index_on_uniform_attention() {
        // A fresh model's attentions are not uniform, so drive the argmax
        // helper directly for the tie rule and check extraction shapes.
        assert_eq!(crate::symbolic::decode::argmax(&[0.1; 10]), 0);
        let samples = corpus(1);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 2);
        let labels = extract_field_labels(&model, &samples[0]);
        assert_eq!(labels.step_fields.len(), 4);
        assert!(labels.answer_field < 10);
        assert!(labels.step_fields.iter().all(|&f| f < 10));
    }

    /// Memorization sanity check: a tiny model overfits 50 samples.
    #[test]
    fn overfits_small_training_set() {
        let samples = corpus(50);
        let mut model = DistributedModel::new(&samples, DistributedConfig::tiny(), 3);
        let opts = TrainOptions {
            epochs: 200,
            // Small batches here: 50 samples at the default batch size give
            // AdaDelta too few updates to leave its warm-up plateau.
            batch_size: 4,
            seed: 3,
            progress: false,
            ..TrainOptions::default()
        };
        train_end_to_end(&mut model, &samples, &samples, None, &opts).unwrap();
        let acc = denotation_accuracy(&model, &samples, true);
        assert!(acc >= 0.98, "training denotation accuracy {acc} below 0.98");
    }
}
