//! Jordan-type operator and field predictors.
//!
//! Both recurrences run without step inputs — the hidden state evolves as
//! `h(t) = sigmoid(W·h(t−1) + b)` from a shared initial state `h(0) = q`,
//! the query embedding. Operator scores come from a learned output matrix;
//! field scores are inner products with field-name embeddings, so field
//! selection commutes with column permutation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::encoder::BiRnnEncoder;
use crate::error::ModelError;
use crate::nn::{Checkpoint, NodeId, ParamId, ParamStore, Tape};
use crate::query::Query;
use crate::sample::Sample;
use crate::table::Table;
use crate::trace::N_OPERATORS;
use crate::vocab::{FieldVocab, Vocab};

/// Symbolic-model dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolicConfig {
    pub word_dim: usize,
    /// Per-direction encoder width; the Jordan hidden state is twice this.
    pub encoder_hidden: usize,
    pub max_steps: usize,
}

impl Default for SymbolicConfig {
    fn default() -> Self {
        SymbolicConfig { word_dim: 24, encoder_hidden: 25, max_steps: 4 }
    }
}

impl SymbolicConfig {
    /// Hidden width of both Jordan RNNs (= query embedding width).
    pub fn state_dim(&self) -> usize {
        2 * self.encoder_hidden
    }
}

#[derive(Debug, Clone)]
struct PredictorParams {
    word_emb: ParamId,
    field_emb: ParamId,
    op_rec: ParamId,
    op_rec_b: ParamId,
    op_out: ParamId,
    field_rec: ParamId,
    field_rec_b: ParamId,
}

/// The symbolic policy: query encoder plus the two Jordan predictors.
#[derive(Debug, Clone)]
pub struct PredictorModel {
    pub config: SymbolicConfig,
    pub vocab: Vocab,
    pub fields: FieldVocab,
    pub store: ParamStore,
    encoder: BiRnnEncoder,
    params: PredictorParams,
}

/// Recurrent state between prediction steps.
#[derive(Debug, Clone, Copy)]
pub struct PredictorState {
    pub h_op: NodeId,
    pub h_field: NodeId,
}

/// Tape nodes for one prediction step.
#[derive(Debug, Clone, Copy)]
pub struct StepNodes {
    pub op_logits: NodeId,
    pub op_probs: NodeId,
    pub field_logits: NodeId,
    pub field_probs: NodeId,
}

/// One full unrolled prediction pass. All rollouts of a sample share it:
/// the recurrences take no action inputs, so the distributions do not
/// depend on what was sampled.
pub struct PredictorForward<'a> {
    pub tape: Tape<'a>,
    pub q: NodeId,
    pub steps: Vec<StepNodes>,
}

impl PredictorForward<'_> {
    pub fn op_probs(&self, step: usize) -> &[f64] {
        self.tape.value(self.steps[step].op_probs).data()
    }

    pub fn field_probs(&self, step: usize) -> &[f64] {
        self.tape.value(self.steps[step].field_probs).data()
    }
}

impl PredictorModel {
    /// Builds a randomly initialized model whose vocabularies come from the
    /// training samples.
    pub fn new(samples: &[Sample], config: SymbolicConfig, seed: u64) -> Self {
        let vocab = Vocab::from_samples(samples);
        let fields = FieldVocab::from_samples(samples);
        Self::with_vocab(vocab, fields, config, seed)
    }

    pub fn with_vocab(
        vocab: Vocab,
        fields: FieldVocab,
        config: SymbolicConfig,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.state_dim();
        let word_emb = store.add_uniform("word_emb", vec![vocab.len(), config.word_dim], &mut rng);
        // Field embeddings double as the field scorer's output weights.
        let field_emb = store.add_uniform("field_emb", vec![fields.len(), d], &mut rng);
        let encoder =
            BiRnnEncoder::register(&mut store, "enc", config.word_dim, config.encoder_hidden, &mut rng);
        let params = PredictorParams {
            word_emb,
            field_emb,
            op_rec: store.add_uniform("op.rec", vec![d, d], &mut rng),
            op_rec_b: store.add_uniform("op.rec_b", vec![d], &mut rng),
            op_out: store.add_uniform("op.out", vec![d, N_OPERATORS], &mut rng),
            field_rec: store.add_uniform("field.rec", vec![d, d], &mut rng),
            field_rec_b: store.add_uniform("field.rec_b", vec![d], &mut rng),
        };
        PredictorModel { config, vocab, fields, store, encoder, params }
    }

    /// Parameters updated by column pretraining: the field predictor and the
    /// query encoder, but never the operator predictor.
    pub fn field_path_param_names(&self) -> Vec<String> {
        let mut names = vec![
            "word_emb".to_string(),
            "field_emb".to_string(),
            "field.rec".to_string(),
            "field.rec_b".to_string(),
        ];
        for dir in ["fwd", "bwd"] {
            for suffix in ["wx", "wh", "b"] {
                names.push(format!("enc.{dir}.{suffix}"));
            }
        }
        names
    }

    pub fn operator_param_names(&self) -> Vec<String> {
        vec!["op.rec".into(), "op.rec_b".into(), "op.out".into()]
    }

    /// Encodes the query into the shared initial hidden state.
    pub fn encode_query<'a>(&'a self, query: &Query) -> Result<(Tape<'a>, NodeId), ModelError> {
        if query.tokens.is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        let mut tape = Tape::new(&self.store);
        let ids = self.vocab.ids(&query.tokens);
        let embeddings: Vec<NodeId> =
            ids.iter().map(|&i| tape.lookup(self.params.word_emb, &[i])).collect();
        let q = self.encoder.encode(&mut tape, &embeddings);
        Ok((tape, q))
    }

    /// Advances both Jordan RNNs one step and scores operators and fields.
    pub fn predict_step(
        &self,
        tape: &mut Tape<'_>,
        table_field_ids: &[u32],
        prev: PredictorState,
    ) -> (StepNodes, PredictorState) {
        let rec = tape.matmul_param(prev.h_op, self.params.op_rec);
        let rec = tape.add_bias(rec, self.params.op_rec_b);
        let h_op = tape.sigmoid(rec);
        let op_logits = tape.matmul_param(h_op, self.params.op_out);
        let op_probs = tape.softmax(op_logits);

        let rec = tape.matmul_param(prev.h_field, self.params.field_rec);
        let rec = tape.add_bias(rec, self.params.field_rec_b);
        let h_field = tape.sigmoid(rec);
        let field_rows = tape.lookup(self.params.field_emb, table_field_ids);
        let field_logits = tape.matmul_nt(h_field, field_rows);
        let field_probs = tape.softmax(field_logits);

        (
            StepNodes { op_logits, op_probs, field_logits, field_probs },
            PredictorState { h_op, h_field },
        )
    }

    /// Unrolls `n_steps` prediction steps for one (query, table) pair.
    pub fn forward<'a>(
        &'a self,
        query: &Query,
        table: &Table,
        n_steps: usize,
    ) -> Result<PredictorForward<'a>, ModelError> {
        let (mut tape, q) = self.encode_query(query)?;
        let table_field_ids = self.fields.table_ids(table);
        let mut state = PredictorState { h_op: q, h_field: q };
        let mut steps = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let (nodes, next) = self.predict_step(&mut tape, &table_field_ids, state);
            steps.push(nodes);
            state = next;
        }
        Ok(PredictorForward { tape, q, steps })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let meta = serde_json::json!({
            "kind": "symbolic",
            "config": self.config,
            "vocab": self.vocab,
            "fields": self.fields,
        });
        Checkpoint::new(self.store.named_tensors(), meta).save(path)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let ckpt = Checkpoint::load(path)?;
        let kind = ckpt.meta["kind"].as_str().unwrap_or_default();
        if kind != "symbolic" {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint holds a `{kind}` model, expected `symbolic`"
            )));
        }
        let config: SymbolicConfig = serde_json::from_value(ckpt.meta["config"].clone())
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut vocab: Vocab = serde_json::from_value(ckpt.meta["vocab"].clone())
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        vocab.rebuild_index();
        let mut fields: FieldVocab = serde_json::from_value(ckpt.meta["fields"].clone())
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        fields.rebuild_index();
        let mut model = PredictorModel::with_vocab(vocab, fields, config, 0);
        model
            .store
            .load_named_tensors(&ckpt.tensors)
            .map_err(ModelError::Checkpoint)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig, Schema};
    use crate::nn::Tensor;
    use approx::assert_relative_eq;

    fn small_corpus() -> Vec<Sample> {
        let config = GenConfig { train: 8, valid: 0, test: 0, ..GenConfig::default() };
        generate_dataset(&config, &Schema::default()).unwrap().train
    }

    #[test]
    fn distributions_normalize() {
        let samples = small_corpus();
        let model = PredictorModel::new(&samples, SymbolicConfig::default(), 3);
        let s = &samples[0];
        let fwd = model.forward(&s.query, &s.table, 4).unwrap();
        for t in 0..4 {
            assert_relative_eq!(fwd.op_probs(t).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(fwd.field_probs(t).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_eq!(fwd.op_probs(t).len(), N_OPERATORS);
            assert_eq!(fwd.field_probs(t).len(), 10);
        }
    }

    #[test]
    fn zero_recurrence_gives_constant_distributions() {
        let samples = small_corpus();
        let mut model = PredictorModel::new(&samples, SymbolicConfig::default(), 3);
        let d = model.config.state_dim();
        for name in ["op.rec", "op.rec_b", "field.rec", "field.rec_b"] {
            let id = model.store.id(name).unwrap();
            let shape = model.store.value(id).shape().to_vec();
            model.store.set_value(id, Tensor::zeros(shape));
        }
        let s = &samples[0];
        let fwd = model.forward(&s.query, &s.table, 4).unwrap();
        // h(t) = sigmoid(0) = 0.5 everywhere, for every step.
        let h = fwd.tape.value(fwd.steps[0].op_probs);
        let _ = h;
        for t in 1..4 {
            assert_eq!(fwd.op_probs(t), fwd.op_probs(0));
            assert_eq!(fwd.field_probs(t), fwd.field_probs(0));
        }
        let _ = d;
    }

    #[test]
    fn empty_query_is_a_contract_error() {
        let samples = small_corpus();
        let model = PredictorModel::new(&samples, SymbolicConfig::default(), 3);
        let empty = Query::new(vec![], Default::default());
        assert!(matches!(
            model.encode_query(&empty),
            Err(ModelError::EmptyQuery)
        ));
    }

    #[test]
    fn save_load_round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let samples = small_corpus();
        let model = PredictorModel::new(&samples, SymbolicConfig::default(), 3);
        let path = dir.path().join("sym.ckpt");
        model.save(&path).unwrap();
        let loaded = PredictorModel::load(&path).unwrap();
        let s = &samples[0];
        let a = model.forward(&s.query, &s.table, 3).unwrap();
        let b = loaded.forward(&s.query, &s.table, 3).unwrap();
        for t in 0..3 {
            assert_eq!(a.op_probs(t), b.op_probs(t));
            assert_eq!(a.field_probs(t), b.field_probs(t));
        }
    }
}
