//! Column pretraining: maximum-likelihood training of the symbolic field
//! predictor (and query encoder) on field labels read off the distributed
//! executor's attention. The operator predictor is untouched.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::derive_seed;
use crate::distributed::{DistributedModel, ExtractedLabels};
use crate::error::ModelError;
use crate::nn::{adadelta_step, Gradients, DEFAULT_EPS, DEFAULT_RHO};
use crate::parallel::{par_map, seq_map};
use crate::sample::Sample;
use crate::symbolic::decode::argmax;
use crate::symbolic::predictor::PredictorModel;

/// Transfers extracted labels onto a sample's execution steps: layers
/// 1..n−1 map across directly and the answer-layer marginal labels the
/// final `select_value` step.
pub fn align_labels(extracted: &ExtractedLabels, n_steps: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n_steps);
    for t in 0..n_steps.saturating_sub(1) {
        out.push(extracted.step_fields[t]);
    }
    out.push(extracted.answer_field);
    out
}

/// Per-step field labels for every sample, from a trained distributed model.
pub fn extract_labels(
    model: &DistributedModel,
    samples: &[Sample],
    parallel: bool,
) -> Vec<Vec<usize>> {
    let one = |s: &Sample| {
        let extracted = crate::distributed::extract_field_labels(model, s);
        align_labels(&extracted, s.query_type.n_steps())
    };
    if parallel {
        par_map(samples, one)
    } else {
        seq_map(samples, one)
    }
}

/// Fraction of steps where the labels agree with the gold trace's fields.
pub fn label_agreement(samples: &[Sample], labels: &[Vec<usize>]) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (s, l) in samples.iter().zip(labels) {
        for (step, &label) in s.gold_trace.executable_steps().iter().zip(l) {
            total += 1;
            if step.field == Some(label) {
                hits += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    pub progress: bool,
    pub parallel: bool,
}

impl Default for PretrainOptions {
    fn default() -> Self {
        PretrainOptions {
            epochs: 40,
            batch_size: 32,
            seed: 1,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            progress: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainEpoch {
    pub epoch: usize,
    pub loss: f64,
    /// Greedy field accuracy against the (imperfect) training labels.
    pub field_acc_vs_labels: f64,
    /// Greedy field accuracy against the gold trace fields.
    pub field_acc_vs_gold: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub epochs: Vec<PretrainEpoch>,
}

fn field_accuracies(
    model: &PredictorModel,
    samples: &[Sample],
    labels: &[Vec<usize>],
    parallel: bool,
) -> (f64, f64) {
    let one = |i: &usize| {
        let s = &samples[*i];
        let n = s.query_type.n_steps();
        let fwd = model.forward(&s.query, &s.table, n).expect("valid sample");
        let mut vs_labels = 0usize;
        let mut vs_gold = 0usize;
        for (t, step) in s.gold_trace.executable_steps().iter().enumerate() {
            let pick = argmax(fwd.field_probs(t));
            if pick == labels[*i][t] {
                vs_labels += 1;
            }
            if Some(pick) == step.field {
                vs_gold += 1;
            }
        }
        (vs_labels, vs_gold, n)
    };
    let idx: Vec<usize> = (0..samples.len()).collect();
    let results = if parallel { par_map(&idx, one) } else { seq_map(&idx, one) };
    let (mut l, mut g, mut total) = (0usize, 0usize, 0usize);
    for (vl, vg, n) in results {
        l += vl;
        g += vg;
        total += n;
    }
    (l as f64 / total.max(1) as f64, g as f64 / total.max(1) as f64)
}

/// Minimizes the per-step field cross-entropy over the field predictor and
/// encoder parameters. Operator-predictor parameters receive no gradient —
/// the loss never touches them — so their bytes are unchanged afterwards.
pub fn pretrain_columns(
    model: &mut PredictorModel,
    samples: &[Sample],
    labels: &[Vec<usize>],
    opts: &PretrainOptions,
) -> Result<PretrainReport, ModelError> {
    if labels.len() != samples.len() {
        return Err(ModelError::LabelCountMismatch { got: labels.len(), expected: samples.len() });
    }
    for (i, (s, l)) in samples.iter().zip(labels).enumerate() {
        if l.len() != s.query_type.n_steps() {
            return Err(ModelError::Checkpoint(format!(
                "label set {i} has {} entries for a {}-step sample",
                l.len(),
                s.query_type.n_steps()
            )));
        }
    }

    let mut report = PretrainReport { epochs: Vec::new() };
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in 0..opts.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x9E7, epoch as u64));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let eval_one = |&i: &usize| {
                let s = &samples[i];
                let n = s.query_type.n_steps();
                let mut fwd = model.forward(&s.query, &s.table, n).expect("valid sample");
                let terms: Vec<_> = (0..n)
                    .map(|t| {
                        fwd.tape.cross_entropy_logits(fwd.steps[t].field_logits, labels[i][t])
                    })
                    .collect();
                let loss = fwd.tape.add_scalars(&terms);
                let value = fwd.tape.value(loss).as_scalar();
                (value, fwd.tape.backward(loss))
            };
            let results: Vec<(f64, Gradients)> = if opts.parallel {
                par_map(batch, eval_one)
            } else {
                seq_map(batch, eval_one)
            };
            let mut total = Gradients::zeros(&model.store);
            for (loss, grads) in results {
                loss_sum += loss;
                total.add_assign(&grads);
            }
            total.scale(1.0 / batch.len() as f64);
            adadelta_step(&mut model.store, &total, opts.rho, opts.eps);
        }

        let (vs_labels, vs_gold) = field_accuracies(model, samples, labels, opts.parallel);
        let loss = loss_sum / samples.len().max(1) as f64;
        report.epochs.push(PretrainEpoch {
            epoch,
            loss,
            field_acc_vs_labels: vs_labels,
            field_acc_vs_gold: vs_gold,
        });
        if opts.progress {
            eprintln!(
                "[pretrain] epoch {epoch:>3}  loss {loss:.4}  fields~labels {vs_labels:.4}  fields~gold {vs_gold:.4}"
            );
        }
    }
    Ok(report)
}
