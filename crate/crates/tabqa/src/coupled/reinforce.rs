//! REINFORCE policy improvement with ε-exploration and reward-inaction.
//!
//! For every sample we draw K rollouts from one shared forward pass (the
//! Jordan recurrences take no action inputs, so all rollouts of a sample
//! see the same distributions), execute each rollout for a binary reward,
//! subtract the per-sample mean reward and truncate negatives to zero. The
//! surviving rollouts contribute `R̃ · (p − 1_a)` at each step's logits,
//! which is exactly the gradient of `R̃ ·` cross-entropy toward the sampled
//! action.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;

use crate::datagen::derive_seed;
use crate::error::ModelError;
use crate::nn::{adadelta_step, Gradients, DEFAULT_EPS, DEFAULT_RHO};
use crate::parallel::{par_map, seq_map};
use crate::sample::Sample;
use crate::symbolic::decode::{actions_to_trace, decode_greedy_trace, sample_actions};
use crate::symbolic::interp::execute_trace;
use crate::symbolic::predictor::PredictorModel;

/// Mean-baseline subtraction with negative rewards truncated to zero.
pub fn adjust_rewards(raw: &[f64]) -> Vec<f64> {
    if raw.is_empty() {
        return Vec::new();
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|r| (r - mean).max(0.0)).collect()
}

#[derive(Debug, Clone)]
pub struct ReinforceOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Rollouts per sample per epoch.
    pub k_samples: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    /// Step budget for greedy decoding during validation.
    pub max_decode_steps: usize,
    pub progress: bool,
    pub parallel: bool,
    /// Append `epoch,denotation_acc,execution_acc` lines here.
    pub curve_csv: Option<PathBuf>,
}

impl Default for ReinforceOptions {
    fn default() -> Self {
        ReinforceOptions {
            epochs: 100,
            batch_size: 32,
            k_samples: 10,
            epsilon: 0.1,
            seed: 1,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            max_decode_steps: crate::trace::MAX_STEPS,
            progress: false,
            parallel: true,
            curve_csv: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReinforceEpoch {
    pub epoch: usize,
    /// Mean raw reward over all rollouts this epoch.
    pub mean_reward: f64,
    pub valid_denotation_acc: f64,
    pub valid_execution_acc: f64,
}

#[derive(Debug, Clone)]
pub struct ReinforceReport {
    pub epochs: Vec<ReinforceEpoch>,
    pub best_epoch: usize,
    pub best_valid_denotation: f64,
}

/// Greedy-decode validation metrics: (denotation accuracy, execution
/// accuracy with trailing EOE ignored).
pub fn greedy_accuracy(
    model: &PredictorModel,
    samples: &[Sample],
    max_steps: usize,
    parallel: bool,
) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let one = |s: &Sample| {
        let trace = decode_greedy_trace(model, &s.query, &s.table, max_steps)
            .expect("valid sample");
        let denotation = execute_trace(&trace, &s.table, &s.query);
        let den_ok = denotation.as_ref() == Some(&s.denotation);
        let exec_ok = trace.matches_ignoring_eoe(&s.gold_trace);
        (den_ok, exec_ok)
    };
    let results = if parallel { par_map(samples, one) } else { seq_map(samples, one) };
    let n = samples.len() as f64;
    let den = results.iter().filter(|(d, _)| *d).count() as f64 / n;
    let exec = results.iter().filter(|(_, e)| *e).count() as f64 / n;
    (den, exec)
}

/// One pass over the training samples; returns the mean raw reward.
pub fn reinforce_epoch(
    model: &mut PredictorModel,
    samples: &[Sample],
    opts: &ReinforceOptions,
    epoch: usize,
) -> Result<f64, ModelError> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x8F0 + epoch as u64, 0));
    order.shuffle(&mut rng);

    let mut reward_sum = 0.0;
    let mut rollouts = 0usize;
    for batch in order.chunks(opts.batch_size) {
        let eval_one = |&i: &usize| -> (f64, Option<Gradients>) {
            let s = &samples[i];
            let n_steps = s.query_type.n_steps();
            let fwd = model
                .forward(&s.query, &s.table, n_steps)
                .expect("valid sample");
            let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                opts.seed,
                0x50_0000 + epoch as u64,
                i as u64,
            ));

            let mut all_actions = Vec::with_capacity(opts.k_samples);
            let mut rewards = Vec::with_capacity(opts.k_samples);
            for _ in 0..opts.k_samples {
                let actions = sample_actions(&fwd, opts.epsilon, &mut sample_rng);
                let trace = actions_to_trace(&actions);
                let result = execute_trace(&trace, &s.table, &s.query);
                rewards.push(if result.as_ref() == Some(&s.denotation) { 1.0 } else { 0.0 });
                all_actions.push(actions);
            }
            let adjusted = adjust_rewards(&rewards);
            let raw_total: f64 = rewards.iter().sum();

            let mut fwd = fwd;
            let mut terms = Vec::new();
            for (k, actions) in all_actions.iter().enumerate() {
                if adjusted[k] == 0.0 {
                    continue;
                }
                for (t, &(op, field)) in actions.iter().enumerate() {
                    let op_ce = fwd.tape.cross_entropy_logits(fwd.steps[t].op_logits, op);
                    let field_ce =
                        fwd.tape.cross_entropy_logits(fwd.steps[t].field_logits, field);
                    let both = fwd.tape.add_scalars(&[op_ce, field_ce]);
                    terms.push(fwd.tape.scale(both, adjusted[k]));
                }
            }
            if terms.is_empty() {
                return (raw_total, None);
            }
            let loss = fwd.tape.add_scalars(&terms);
            (raw_total, Some(fwd.tape.backward(loss)))
        };

        let results = if opts.parallel { par_map(batch, eval_one) } else { seq_map(batch, eval_one) };
        let mut total = Gradients::zeros(&model.store);
        for (raw, grads) in results {
            reward_sum += raw;
            rollouts += opts.k_samples;
            if let Some(g) = grads {
                total.add_assign(&g);
            }
        }
        total.scale(1.0 / batch.len() as f64);
        adadelta_step(&mut model.store, &total, opts.rho, opts.eps);
    }
    Ok(reward_sum / rollouts.max(1) as f64)
}

/// Runs REINFORCE for `opts.epochs`, tracking validation accuracy by greedy
/// decoding and restoring the best-denotation parameters at the end.
pub fn train_reinforce(
    model: &mut PredictorModel,
    train: &[Sample],
    valid: &[Sample],
    opts: &ReinforceOptions,
) -> Result<ReinforceReport, ModelError> {
    let mut csv = match &opts.curve_csv {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "epoch,denotation_acc,execution_acc")?;
            Some(f)
        }
        None => None,
    };

    let mut report = ReinforceReport {
        epochs: Vec::new(),
        best_epoch: 0,
        best_valid_denotation: f64::MIN,
    };
    let mut best_params = model.store.named_tensors();

    for epoch in 0..opts.epochs {
        let mean_reward = reinforce_epoch(model, train, opts, epoch)?;
        let (den, exec) = greedy_accuracy(model, valid, opts.max_decode_steps, opts.parallel);
        if den > report.best_valid_denotation {
            report.best_valid_denotation = den;
            report.best_epoch = epoch;
            best_params = model.store.named_tensors();
        }
        report.epochs.push(ReinforceEpoch {
            epoch,
            mean_reward,
            valid_denotation_acc: den,
            valid_execution_acc: exec,
        });
        if let Some(f) = csv.as_mut() {
            writeln!(f, "{epoch},{den:.6},{exec:.6}")?;
        }
        if opts.progress {
            eprintln!(
                "[reinforce] epoch {epoch:>4}  reward {mean_reward:.4}  valid_den {den:.4}  valid_exec {exec:.4}"
            );
        }
    }

    model
        .store
        .load_named_tensors(&best_params)
        .map_err(ModelError::Checkpoint)?;
    Ok(report)
}

/// One restarted trajectory: its seed, its learning curve and its best
/// model.
pub struct TrajectoryOutcome {
    pub seed: u64,
    pub report: ReinforceReport,
    pub model: PredictorModel,
}

pub struct TrajectoryRun {
    pub outcomes: Vec<TrajectoryOutcome>,
    /// Index of the winner by best validation denotation accuracy.
    pub best: usize,
}

/// Trains independently seeded replicas and keeps the one with the highest
/// validation denotation accuracy. `init` builds the starting model for a
/// trajectory seed (fresh random weights, or pretrained columns).
pub fn run_trajectories<F>(
    init: F,
    train: &[Sample],
    valid: &[Sample],
    seeds: &[u64],
    opts: &ReinforceOptions,
    curve_dir: Option<&std::path::Path>,
) -> Result<TrajectoryRun, ModelError>
where
    F: Fn(u64) -> Result<PredictorModel, ModelError> + Sync,
{
    assert!(!seeds.is_empty(), "at least one trajectory required");
    let mut outcomes = Vec::with_capacity(seeds.len());
    for (t, &seed) in seeds.iter().enumerate() {
        let mut model = init(seed)?;
        let mut traj_opts = opts.clone();
        traj_opts.seed = seed;
        traj_opts.curve_csv =
            curve_dir.map(|d| d.join(format!("trajectory_{t}.csv")));
        if opts.progress {
            eprintln!("[trajectory {t}] seed {seed}");
        }
        let report = train_reinforce(&mut model, train, valid, &traj_opts)?;
        outcomes.push(TrajectoryOutcome { seed, report, model });
    }
    let best = outcomes
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.report
                .best_valid_denotation
                .partial_cmp(&b.report.best_valid_denotation)
                .unwrap()
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .unwrap();
    Ok(TrajectoryRun { outcomes, best })
}
