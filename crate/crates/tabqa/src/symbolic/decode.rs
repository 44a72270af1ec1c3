//! Greedy decoding and ε-greedy rollout sampling for the symbolic policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::interp::execute_trace;
use super::predictor::{PredictorForward, PredictorModel, PredictorState};
use crate::error::ModelError;
use crate::query::Query;
use crate::table::{CellValue, Table};
use crate::trace::{ExecutionStep, ExecutionTrace, OperatorKind, EXECUTABLE_OPS};

/// First index of the maximum; ties break to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Greedy decode: argmax operator and field at every step, stopping at EOE
/// or after `max_steps` executable steps. The returned trace carries no
/// explicit EOE step.
pub fn decode_greedy_trace(
    model: &PredictorModel,
    query: &Query,
    table: &Table,
    max_steps: usize,
) -> Result<ExecutionTrace, ModelError> {
    let (mut tape, q) = model.encode_query(query)?;
    let field_ids = model.fields.table_ids(table);
    let mut state = PredictorState { h_op: q, h_field: q };
    let mut steps = Vec::new();
    for _ in 0..max_steps {
        let (nodes, next) = model.predict_step(&mut tape, &field_ids, state);
        let op_idx = argmax(tape.value(nodes.op_probs).data());
        let op = OperatorKind::from_index(op_idx).expect("operator index in range");
        if op == OperatorKind::Eoe {
            break;
        }
        let field = argmax(tape.value(nodes.field_probs).data());
        steps.push(ExecutionStep::new(op, field));
        state = next;
    }
    Ok(ExecutionTrace::new(steps))
}

/// Greedy decode followed by interpretation.
pub fn decode_greedy(
    model: &PredictorModel,
    query: &Query,
    table: &Table,
    max_steps: usize,
) -> Result<(ExecutionTrace, Option<CellValue>), ModelError> {
    let trace = decode_greedy_trace(model, query, table, max_steps)?;
    let value = execute_trace(&trace, table, query);
    Ok((trace, value))
}

/// Full distributions and the chosen action indices for one sampled step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub op_probs: Vec<f64>,
    pub field_probs: Vec<f64>,
    pub op_choice: usize,
    pub field_choice: usize,
}

/// Samples an index from `probs[..limit]`, renormalized.
fn sample_index(probs: &[f64], limit: usize, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = probs[..limit].iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, &p) in probs[..limit].iter().enumerate() {
        r -= p;
        if r <= 0.0 {
            return i;
        }
    }
    limit - 1
}

/// One ε-greedy action draw per step over a shared forward pass: with
/// probability ε both the operator and the field come from uniform
/// distributions (the six executable operators, all fields); otherwise both
/// come from the predicted distributions restricted to executable
/// operators. EOE is never sampled — the step count is known during
/// training and the final step is followed by an implicit EOE.
pub fn sample_actions(
    fwd: &PredictorForward<'_>,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let n_exec = EXECUTABLE_OPS.len();
    fwd.steps
        .iter()
        .enumerate()
        .map(|(t, _)| {
            let n_fields = fwd.field_probs(t).len();
            if rng.gen::<f64>() < eps {
                (rng.gen_range(0..n_exec), rng.gen_range(0..n_fields))
            } else {
                let op = sample_index(fwd.op_probs(t), n_exec, rng);
                let field = sample_index(fwd.field_probs(t), n_fields, rng);
                (op, field)
            }
        })
        .collect()
}

pub fn actions_to_trace(actions: &[(usize, usize)]) -> ExecutionTrace {
    ExecutionTrace::new(
        actions
            .iter()
            .map(|&(op, field)| {
                ExecutionStep::new(
                    OperatorKind::from_index(op).expect("executable index"),
                    field,
                )
            })
            .collect(),
    )
}

/// Draws one ε-greedy rollout, returning the trace plus per-step records of
/// the full distributions and chosen indices.
pub fn sample_trace(
    model: &PredictorModel,
    query: &Query,
    table: &Table,
    n_steps: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ExecutionTrace, Vec<StepRecord>), ModelError> {
    let fwd = model.forward(query, table, n_steps)?;
    let actions = sample_actions(&fwd, eps, rng);
    let records = actions
        .iter()
        .enumerate()
        .map(|(t, &(op, field))| StepRecord {
            op_probs: fwd.op_probs(t).to_vec(),
            field_probs: fwd.field_probs(t).to_vec(),
            op_choice: op,
            field_choice: field,
        })
        .collect();
    Ok((actions_to_trace(&actions), records))
}

/// Probability that a uniform policy samples one fixed trace of
/// `steps` (operator, field) choices.
pub fn uniform_trace_probability(n_ops: usize, n_fields: usize, steps: u32) -> f64 {
    (1.0 / (n_ops as f64 * n_fields as f64)).powi(steps as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig, Schema};
    use crate::sample::Sample;
    use crate::symbolic::predictor::SymbolicConfig;
    use rand::SeedableRng;

    fn corpus(n: usize) -> Vec<Sample> {
        let config = GenConfig { train: n, valid: 0, test: 0, ..GenConfig::default() };
        generate_dataset(&config, &Schema::default()).unwrap().train
    }

    #[test]
    fn greedy_decode_is_deterministic() {
        let samples = corpus(4);
        let model = PredictorModel::new(&samples, SymbolicConfig::default(), 5);
        let s = &samples[0];
        let a = decode_greedy_trace(&model, &s.query, &s.table, 4).unwrap();
        let b = decode_greedy_trace(&model, &s.query, &s.table, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.n_executable() <= 4);
    }

    #[test]
    fn sample_index_on_onehot_always_returns_hot_index() {
        let probs = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_index(&probs, 6, &mut rng), 2);
        }
    }

    #[test]
    fn eps_one_sampling_is_uniform_within_three_sigma() {
        let samples = corpus(1);
        let model = PredictorModel::new(&samples, SymbolicConfig::default(), 5);
        let s = &samples[0];
        let fwd = model.forward(&s.query, &s.table, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(124);
        let draws = 60_000;
        let mut op_counts = [0usize; 6];
        for _ in 0..draws {
            let actions = sample_actions(&fwd, 1.0, &mut rng);
            op_counts[actions[0].0] += 1;
        }
        let p = 1.0 / 6.0;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        for (i, &c) in op_counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "operator {i} frequency {freq} outside 3σ of uniform"
            );
        }
    }

    #[test]
    fn sampled_traces_execute_without_crashing() {
        let samples = corpus(20);
        let model = PredictorModel::new(&samples, SymbolicConfig::default(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in &samples {
            for _ in 0..20 {
                let (trace, records) = sample_trace(
                    &model,
                    &s.query,
                    &s.table,
                    s.query_type.n_steps(),
                    0.1,
                    &mut rng,
                )
                .unwrap();
                assert_eq!(records.len(), s.query_type.n_steps());
                let _ = crate::symbolic::interp::execute_trace(&trace, &s.table, &s.query);
            }
        }
    }

    #[test]
    fn cold_start_probability_matches_closed_form() {
        let p = uniform_trace_probability(6, 10, 4);
        let expect = 1.0 / (6f64.powi(4) * 10f64.powi(4));
        assert!((p - expect).abs() / expect < 1e-12);
        assert!((p - 7.7e-8).abs() < 1e-9);
    }
}
