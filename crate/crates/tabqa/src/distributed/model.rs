//! The fully distributed table executor.
//!
//! A bi-directional RNN encodes the query; every cell is encoded from its
//! value and field-name embeddings; a fixed stack of execution layers then
//! alternates soft field selection (attention whose softmax weights are the
//! field embeddings) with per-row annotation vectors, summarized by
//! row-wise max pooling. The final layer scores every cell against the
//! query and execution state. Nothing is indexed by position, so the whole
//! model commutes with row and column permutations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::encoder::BiRnnEncoder;
use crate::error::ModelError;
use crate::nn::tensor::softmax_flat;
use crate::nn::{Checkpoint, NodeId, ParamId, ParamStore, Tape};
use crate::query::Query;
use crate::sample::Sample;
use crate::table::{CellValue, Table};
use crate::vocab::{FieldVocab, Vocab};

/// Distributed-model dimensions. Defaults sit at the small end of the
/// 20–50 range except the query encoder, which uses 50 per direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributedConfig {
    pub word_dim: usize,
    pub field_dim: usize,
    pub cell_dim: usize,
    pub annot_dim: usize,
    pub encoder_hidden: usize,
    pub cell_hidden: usize,
    pub att_hidden: usize,
    pub row_hidden: usize,
    pub answer_hidden: usize,
    /// Execution layers before the answer layer; fixed for all queries.
    pub exec_steps: usize,
}

impl Default for DistributedConfig {
    fn default() -> Self {
        DistributedConfig {
            word_dim: 24,
            field_dim: 24,
            cell_dim: 32,
            annot_dim: 32,
            encoder_hidden: 50,
            cell_hidden: 32,
            att_hidden: 32,
            row_hidden: 32,
            answer_hidden: 32,
            exec_steps: 4,
        }
    }
}

impl DistributedConfig {
    /// A deliberately small variant for overfit checks and gradient tests.
    pub fn tiny() -> Self {
        DistributedConfig {
            word_dim: 12,
            field_dim: 12,
            cell_dim: 16,
            annot_dim: 16,
            encoder_hidden: 16,
            cell_hidden: 16,
            att_hidden: 16,
            row_hidden: 16,
            answer_hidden: 16,
            exec_steps: 4,
        }
    }

    pub fn query_dim(&self) -> usize {
        2 * self.encoder_hidden
    }
}

#[derive(Debug, Clone)]
struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl Mlp {
    fn register(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Mlp {
            w1: store.add_uniform(format!("{prefix}.w1"), vec![input, hidden], rng),
            b1: store.add_uniform(format!("{prefix}.b1"), vec![hidden], rng),
            w2: store.add_uniform(format!("{prefix}.w2"), vec![hidden, output], rng),
            b2: store.add_uniform(format!("{prefix}.b2"), vec![output], rng),
        }
    }

    /// tanh hidden layer, linear output.
    fn scores(&self, tape: &mut Tape<'_>, x: NodeId) -> NodeId {
        let h = tape.matmul_param(x, self.w1);
        let h = tape.add_bias(h, self.b1);
        let h = tape.tanh(h);
        let o = tape.matmul_param(h, self.w2);
        tape.add_bias(o, self.b2)
    }

    /// tanh hidden layer, tanh output (bounded vector outputs).
    fn vectors(&self, tape: &mut Tape<'_>, x: NodeId) -> NodeId {
        let o = self.scores(tape, x);
        tape.tanh(o)
    }
}

#[derive(Debug, Clone)]
struct DistributedParams {
    word_emb: ParamId,
    field_emb: ParamId,
    init_annot: ParamId,
    cell: Mlp,
    att: Vec<Mlp>,
    row: Vec<Mlp>,
    answer: Mlp,
}

/// The distributed executor's parameters and vocabularies.
#[derive(Debug, Clone)]
pub struct DistributedModel {
    pub config: DistributedConfig,
    pub vocab: Vocab,
    pub fields: FieldVocab,
    pub store: ParamStore,
    encoder: BiRnnEncoder,
    params: DistributedParams,
}

/// Nodes of one execution layer.
#[derive(Debug, Clone, Copy)]
pub struct ExecStepNodes {
    pub field_logits: NodeId,
    pub field_probs: NodeId,
    pub annotations: NodeId,
    pub global: NodeId,
}

/// One recorded forward pass over a (table, query) pair.
pub struct DistributedForward<'a> {
    pub tape: Tape<'a>,
    pub q: NodeId,
    pub cells: NodeId,
    pub steps: Vec<ExecStepNodes>,
    pub answer_logits: NodeId,
    pub rows: usize,
    pub fields: usize,
}

impl DistributedForward<'_> {
    /// Field attention of step `t` (0-based).
    pub fn field_probs(&self, t: usize) -> &[f64] {
        self.tape.value(self.steps[t].field_probs).data()
    }

    /// The answer distribution over all cells, row-major.
    pub fn answer_probs(&self) -> Vec<f64> {
        softmax_flat(self.tape.value(self.answer_logits).data())
    }

    /// Adds softmax + marginal nodes for the answer layer; used when the
    /// answer column is supervised.
    pub fn answer_marginal_nodes(&mut self) -> (NodeId, NodeId) {
        let probs = self.tape.softmax(self.answer_logits);
        let marginal = self.tape.field_marginal(probs, self.fields);
        (probs, marginal)
    }
}

/// Marginalizes a row-major cell distribution over rows.
pub fn field_marginal_of(dist: &[f64], fields: usize) -> Vec<f64> {
    let mut out = vec![0.0; fields];
    for (i, &v) in dist.iter().enumerate() {
        out[i % fields] += v;
    }
    out
}

/// Flat row-major index of the unique cell holding the denotation.
pub fn denotation_cell(table: &Table, denotation: &CellValue) -> Option<usize> {
    for (i, row) in table.rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if cell == denotation {
                return Some(i * table.n_cols() + j);
            }
        }
    }
    None
}

impl DistributedModel {
    pub fn new(samples: &[Sample], config: DistributedConfig, seed: u64) -> Self {
        let vocab = Vocab::from_samples(samples);
        let fields = FieldVocab::from_samples(samples);
        Self::with_vocab(vocab, fields, config, seed)
    }

    pub fn with_vocab(
        vocab: Vocab,
        fields: FieldVocab,
        config: DistributedConfig,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let q_dim = config.query_dim();

        let word_emb =
            store.add_uniform("word_emb", vec![vocab.len(), config.word_dim], &mut rng);
        let field_emb =
            store.add_uniform("field_emb", vec![fields.len(), config.field_dim], &mut rng);
        let encoder = BiRnnEncoder::register(
            &mut store,
            "enc",
            config.word_dim,
            config.encoder_hidden,
            &mut rng,
        );
        let cell = Mlp::register(
            &mut store,
            "cell",
            config.word_dim + config.field_dim,
            config.cell_hidden,
            config.cell_dim,
            &mut rng,
        );
        let init_annot = store.add_uniform("init_annot", vec![1, config.annot_dim], &mut rng);

        let mut att = Vec::with_capacity(config.exec_steps);
        let mut row = Vec::with_capacity(config.exec_steps);
        for t in 1..=config.exec_steps {
            att.push(Mlp::register(
                &mut store,
                &format!("step{t}.att"),
                q_dim + config.field_dim + config.annot_dim,
                config.att_hidden,
                1,
                &mut rng,
            ));
            row.push(Mlp::register(
                &mut store,
                &format!("step{t}.row"),
                q_dim + config.annot_dim + config.annot_dim + config.cell_dim,
                config.row_hidden,
                config.annot_dim,
                &mut rng,
            ));
        }
        let answer = Mlp::register(
            &mut store,
            "answer",
            q_dim + config.annot_dim + config.annot_dim + config.cell_dim,
            config.answer_hidden,
            1,
            &mut rng,
        );

        let params = DistributedParams { word_emb, field_emb, init_annot, cell, att, row, answer };
        DistributedModel { config, vocab, fields, store, encoder, params }
    }

    /// Encodes the query tokens into the query vector.
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

    /// Encodes every cell from its (value token, field name) embeddings.
    /// Cells sharing both get identical vectors by construction.
    pub fn encode_table(&self, tape: &mut Tape<'_>, table: &Table) -> NodeId {
        let (rows, cols) = (table.n_rows(), table.n_cols());
        let mut token_ids = Vec::with_capacity(rows * cols);
        let mut field_ids = Vec::with_capacity(rows * cols);
        let col_ids = self.fields.table_ids(table);
        for row in &table.rows {
            for (j, cell) in row.iter().enumerate() {
                token_ids.push(self.vocab.id(&cell.token()));
                field_ids.push(col_ids[j]);
            }
        }
        let value_emb = tape.lookup(self.params.word_emb, &token_ids);
        let field_emb = tape.lookup(self.params.field_emb, &field_ids);
        let cell_in = tape.concat_cols(&[value_emb, field_emb]);
        self.params.cell.vectors(tape, cell_in)
    }

    /// One execution layer: soft field selection, column mixing, row
    /// re-annotation and global max pooling.
    pub fn exec_step(
        &self,
        tape: &mut Tape<'_>,
        step: usize,
        q: NodeId,
        field_rows: NodeId,
        cells: NodeId,
        prev_annot: NodeId,
        prev_global: NodeId,
        rows: usize,
        fields: usize,
    ) -> Result<ExecStepNodes, ModelError> {
        if step >= self.config.exec_steps {
            return Err(ModelError::StepOutOfRange(step, self.config.exec_steps));
        }
        let q_rep = tape.broadcast_row(q, fields);
        let g_rep = tape.broadcast_row(prev_global, fields);
        let att_in = tape.concat_cols(&[q_rep, field_rows, g_rep]);
        let field_logits = self.params.att[step].scores(tape, att_in);
        let field_probs = tape.softmax(field_logits);

        let selected = tape.field_weighted_sum(cells, field_probs, rows);
        let q_rows = tape.broadcast_row(q, rows);
        let g_rows = tape.broadcast_row(prev_global, rows);
        let row_in = tape.concat_cols(&[q_rows, g_rows, prev_annot, selected]);
        let annotations = self.params.row[step].vectors(tape, row_in);
        let global = tape.max_pool_rows(annotations);

        Ok(ExecStepNodes { field_logits, field_probs, annotations, global })
    }

    /// Full forward pass: encoder, table encoding, the execution stack and
    /// the answer scores.
    pub fn forward<'a>(
        &'a self,
        table: &Table,
        query: &Query,
    ) -> Result<DistributedForward<'a>, ModelError> {
        let (rows, fields) = (table.n_rows(), table.n_cols());
        let (mut tape, q) = self.encode_query(query)?;
        let cells = self.encode_table(&mut tape, table);
        let field_rows = tape.lookup(self.params.field_emb, &self.fields.table_ids(table));

        let mut annot = tape.leaf_param(self.params.init_annot);
        annot = tape.broadcast_row(annot, rows);
        let mut global = tape.max_pool_rows(annot);

        let mut steps = Vec::with_capacity(self.config.exec_steps);
        for t in 0..self.config.exec_steps {
            let nodes =
                self.exec_step(&mut tape, t, q, field_rows, cells, annot, global, rows, fields)?;
            annot = nodes.annotations;
            global = nodes.global;
            steps.push(nodes);
        }

        let q_cells = tape.broadcast_row(q, rows * fields);
        let g_cells = tape.broadcast_row(global, rows * fields);
        let annot_cells = tape.repeat_rows_each(annot, fields);
        let ans_in = tape.concat_cols(&[q_cells, g_cells, annot_cells, cells]);
        let answer_logits = self.params.answer.scores(&mut tape, ans_in);

        Ok(DistributedForward { tape, q, cells, steps, answer_logits, rows, fields })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let meta = serde_json::json!({
            "kind": "distributed",
            "config": self.config,
            "vocab": self.vocab,
            "fields": self.fields,
        });
        Checkpoint::new(self.store.named_tensors(), meta).save(path)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let ckpt = Checkpoint::load(path)?;
        let kind = ckpt.meta["kind"].as_str().unwrap_or_default();
        if kind != "distributed" {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint holds a `{kind}` model, expected `distributed`"
            )));
        }
        let config: DistributedConfig = serde_json::from_value(ckpt.meta["config"].clone())
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut vocab: Vocab = serde_json::from_value(ckpt.meta["vocab"].clone())
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        vocab.rebuild_index();
        let mut fields: FieldVocab = serde_json::from_value(ckpt.meta["fields"].clone())
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        fields.rebuild_index();
        let mut model = DistributedModel::with_vocab(vocab, fields, config, 0);
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
    use approx::assert_relative_eq;

    fn corpus(n: usize) -> Vec<Sample> {
        let config = GenConfig { train: n, valid: 0, test: 0, ..GenConfig::default() };
        generate_dataset(&config, &Schema::default()).unwrap().train
    }

    fn permute_table(table: &Table, row_perm: &[usize], col_perm: &[usize]) -> Table {
        let fields = col_perm.iter().map(|&c| table.fields[c].clone()).collect();
        let rows = row_perm
            .iter()
            .map(|&r| col_perm.iter().map(|&c| table.rows[r][c].clone()).collect())
            .collect();
        Table::new(fields, rows).unwrap()
    }

    #[test]
    fn forward_shapes_and_normalization() {
        let samples = corpus(4);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 1);
        let s = &samples[0];
        let fwd = model.forward(&s.table, &s.query).unwrap();
        assert_eq!(fwd.steps.len(), 4);
        for t in 0..4 {
            let p = fwd.field_probs(t);
            assert_eq!(p.len(), 10);
            assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        let answer = fwd.answer_probs();
        assert_eq!(answer.len(), 100);
        assert_relative_eq!(answer.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let marginal = field_marginal_of(&answer, 10);
        assert_relative_eq!(marginal.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_value_field_pairs_share_cell_vectors() {
        let samples = corpus(1);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 1);
        // Two rows with the same token in the same entity column.
        let mut table = samples[0].table.clone();
        table.rows[1][5] = table.rows[0][5].clone();
        let mut tape = Tape::new(&model.store);
        let cells = model.encode_table(&mut tape, &table);
        let v = tape.value(cells);
        let f = table.n_cols();
        assert_eq!(v.row(5), v.row(f + 5));
    }

    #[test]
    fn answer_distribution_is_permutation_equivariant() {
        let samples = corpus(3);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 7);
        let s = &samples[1];
        let row_perm = vec![3, 1, 4, 0, 9, 2, 7, 5, 8, 6];
        let col_perm = vec![2, 0, 3, 1, 7, 9, 4, 6, 5, 8];
        let shuffled = permute_table(&s.table, &row_perm, &col_perm);

        let base = model.forward(&s.table, &s.query).unwrap().answer_probs();
        let perm = model.forward(&shuffled, &s.query).unwrap().answer_probs();

        let f = s.table.n_cols();
        let mut max_dev = 0.0f64;
        for (pi, &orig_row) in row_perm.iter().enumerate() {
            for (pj, &orig_col) in col_perm.iter().enumerate() {
                let dev = (perm[pi * f + pj] - base[orig_row * f + orig_col]).abs();
                max_dev = max_dev.max(dev);
            }
        }
        assert!(max_dev < 1e-9, "max deviation {max_dev}");
    }

    #[test]
    fn column_shuffle_permutes_field_attention() {
        let samples = corpus(3);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 7);
        let s = &samples[2];
        let col_perm = vec![5, 3, 8, 0, 2, 9, 1, 7, 4, 6];
        let identity: Vec<usize> = (0..10).collect();
        let shuffled = permute_table(&s.table, &identity, &col_perm);

        let base = model.forward(&s.table, &s.query).unwrap();
        let perm = model.forward(&shuffled, &s.query).unwrap();
        for t in 0..4 {
            let b = base.field_probs(t);
            let p = perm.field_probs(t);
            for (pj, &orig) in col_perm.iter().enumerate() {
                assert!((p[pj] - b[orig]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn row_shuffle_permutes_annotations_and_preserves_global() {
        let samples = corpus(3);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 7);
        let s = &samples[0];
        let row_perm = vec![9, 0, 8, 1, 7, 2, 6, 3, 5, 4];
        let identity: Vec<usize> = (0..10).collect();
        let shuffled = permute_table(&s.table, &row_perm, &identity);

        let base = model.forward(&s.table, &s.query).unwrap();
        let perm = model.forward(&shuffled, &s.query).unwrap();
        for t in 0..4 {
            let b = base.tape.value(base.steps[t].annotations);
            let p = perm.tape.value(perm.steps[t].annotations);
            for (pi, &orig) in row_perm.iter().enumerate() {
                assert_eq!(p.row(pi), b.row(orig));
            }
            assert_eq!(
                base.tape.value(base.steps[t].global).data(),
                perm.tape.value(perm.steps[t].global).data()
            );
        }
    }

    #[test]
    fn denotation_cell_locates_unique_cell() {
        let samples = corpus(5);
        for s in &samples {
            let idx = denotation_cell(&s.table, &s.denotation).unwrap();
            let (i, j) = (idx / 10, idx % 10);
            assert_eq!(&s.table.rows[i][j], &s.denotation);
        }
    }

    #[test]
    fn marginal_of_onehot_is_onehot() {
        let mut dist = vec![0.0; 100];
        dist[37] = 1.0;
        let m = field_marginal_of(&dist, 10);
        assert_eq!(m[7], 1.0);
        assert_eq!(m.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn uniform_cell_distribution_has_uniform_marginal() {
        let dist = vec![0.01; 100];
        let m = field_marginal_of(&dist, 10);
        for v in m {
            assert_relative_eq!(v, 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn save_load_round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let samples = corpus(2);
        let model = DistributedModel::new(&samples, DistributedConfig::tiny(), 11);
        let path = dir.path().join("dist.ckpt");
        model.save(&path).unwrap();
        let loaded = DistributedModel::load(&path).unwrap();
        let s = &samples[0];
        let a = model.forward(&s.table, &s.query).unwrap().answer_probs();
        let b = loaded.forward(&s.table, &s.query).unwrap().answer_probs();
        assert_eq!(a, b);
    }
}
