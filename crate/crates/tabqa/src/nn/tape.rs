//! Tape-recorded forward primitives with reverse-mode gradients.
//!
//! A [`Tape`] records one forward pass over tensors; [`Tape::backward`]
//! walks the recording once in reverse and returns gradients for every
//! parameter reachable from the loss. Ops validate shapes eagerly and
//! panic with both shapes named — shape errors are programming errors
//! here, not runtime conditions.

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{
    log_sum_exp, matmul, matmul_nt_acc, matmul_tn_acc, softmax_flat, Tensor,
};

/// Index of a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Target of a cross-entropy loss: a class index or a full distribution.
#[derive(Debug, Clone)]
pub enum Target {
    Index(usize),
    Dist(Vec<f64>),
}

#[derive(Debug)]
enum Op {
    /// Constant input; no gradient flows into it.
    Input,
    /// A parameter materialized as a node (small tensors only).
    LeafParam(ParamId),
    /// Row gather from an embedding-table parameter.
    Lookup { param: ParamId, indices: Vec<u32> },
    MatMul { a: NodeId, b: NodeId },
    /// a · bᵀ; scores a batch of rows against a set of embedding rows.
    MatMulNT { a: NodeId, b: NodeId },
    /// x · W for a weight parameter, avoiding a full copy of W.
    MatMulParam { x: NodeId, w: ParamId },
    /// Broadcast row-vector bias parameter added to every row of x.
    AddBias { x: NodeId, b: ParamId },
    Add { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    /// Column-wise concatenation of matrices with equal row counts.
    ConcatCols { parts: Vec<NodeId> },
    /// Repeats a single row n times.
    BroadcastRow { x: NodeId, n: usize },
    /// Repeats each row of x `times` times, contiguously.
    RepeatRowsEach { x: NodeId, times: usize },
    Tanh { x: NodeId },
    Sigmoid { x: NodeId },
    /// Softmax over the flattened tensor.
    Softmax { x: NodeId },
    /// Per-column max over rows; `argmax` caches the winning row per column.
    MaxPoolRows { x: NodeId, argmax: Vec<u32> },
    /// out[i] = Σ_j w[j] · cells[i·F + j]; cells is (rows·F)×d, w has F entries.
    FieldWeightedSum { cells: NodeId, weights: NodeId, rows: usize },
    /// Column sums of a flat cell distribution: out[j] = Σ_i x[i·F + j].
    FieldMarginal { x: NodeId, fields: usize },
    SumAll { x: NodeId },
    /// −log softmax(logits)[target]; caches the softmax for the backward pass.
    CrossEntropyLogits { logits: NodeId, target: usize, probs: Vec<f64> },
    /// −Σ t·log p over an explicit probability vector. Probabilities must be
    /// strictly positive wherever the target has mass.
    CrossEntropyProbs { probs: NodeId, target: Target },
    /// Sum of scalar nodes.
    AddScalars { parts: Vec<NodeId> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// One forward recording against a parameter store.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape { store, nodes: Vec::with_capacity(64) }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op });
        id
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn leaf_param(&mut self, param: ParamId) -> NodeId {
        let value = self.store.value(param).clone();
        self.push(value, Op::LeafParam(param))
    }

    /// Embedding lookup: gathers `indices` rows of the parameter matrix.
    pub fn lookup(&mut self, param: ParamId, indices: &[u32]) -> NodeId {
        let table = self.store.value(param);
        let (rows, cols) = (table.rows(), table.cols());
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            assert!(
                (i as usize) < rows,
                "lookup index {i} out of range for table `{}` with {rows} rows",
                self.store.name(param)
            );
            data.extend_from_slice(table.row(i as usize));
        }
        let value = Tensor::matrix(indices.len(), cols, data);
        self.push(value, Op::Lookup { param, indices: indices.to_vec() })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = matmul(self.value(a), self.value(b));
        self.push(value, Op::MatMul { a, b })
    }

    /// a · bᵀ for a: (m×n), b: (k×n) → (m×k).
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        let mut value = Tensor::zeros(vec![av.rows(), bv.rows()]);
        matmul_nt_acc(av, bv, &mut value);
        self.push(value, Op::MatMulNT { a, b })
    }

    pub fn matmul_param(&mut self, x: NodeId, w: ParamId) -> NodeId {
        let value = matmul(self.value(x), self.store.value(w));
        self.push(value, Op::MatMulParam { x, w })
    }

    /// Adds a bias row-vector parameter to every row of x.
    pub fn add_bias(&mut self, x: NodeId, b: ParamId) -> NodeId {
        let bias = self.store.value(b);
        let xv = self.value(x);
        assert_eq!(
            xv.cols(),
            bias.len(),
            "shape mismatch in add_bias: {:?} vs {:?}",
            xv.shape(),
            bias.shape()
        );
        let cols = xv.cols();
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let row = &mut value.data_mut()[r * cols..(r + 1) * cols];
            for (v, &bv) in row.iter_mut().zip(bias.data()) {
                *v += bv;
            }
        }
        self.push(value, Op::AddBias { x, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(
            av.shape(),
            bv.shape(),
            "shape mismatch in add: {:?} vs {:?}",
            av.shape(),
            bv.shape()
        );
        let mut value = av.clone();
        value.add_assign(bv);
        self.push(value, Op::Add { a, b })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let mut value = self.value(x).clone();
        value.scale_assign(c);
        self.push(value, Op::Scale { x, c })
    }

    /// Concatenates matrices along columns; all parts must share a row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_cols needs at least one part");
        let rows = self.value(parts[0]).rows();
        let total_cols: usize = parts
            .iter()
            .map(|&p| {
                let v = self.value(p);
                assert_eq!(
                    v.rows(),
                    rows,
                    "shape mismatch in concat_cols: {:?} vs {rows} rows",
                    v.shape()
                );
                v.cols()
            })
            .sum();
        let mut data = Vec::with_capacity(rows * total_cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::matrix(rows, total_cols, data);
        self.push(value, Op::ConcatCols { parts: parts.to_vec() })
    }

    pub fn broadcast_row(&mut self, x: NodeId, n: usize) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.rows(), 1, "broadcast_row needs a single row, got {:?}", xv.shape());
        let cols = xv.cols();
        let mut data = Vec::with_capacity(n * cols);
        for _ in 0..n {
            data.extend_from_slice(xv.row(0));
        }
        let value = Tensor::matrix(n, cols, data);
        self.push(value, Op::BroadcastRow { x, n })
    }

    pub fn repeat_rows_each(&mut self, x: NodeId, times: usize) -> NodeId {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        let mut data = Vec::with_capacity(rows * times * cols);
        for r in 0..rows {
            for _ in 0..times {
                data.extend_from_slice(xv.row(r));
            }
        }
        let value = Tensor::matrix(rows * times, cols, data);
        self.push(value, Op::RepeatRowsEach { x, times })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v = v.tanh();
        }
        self.push(value, Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        self.push(value, Op::Sigmoid { x })
    }

    /// Softmax over the flattened tensor (max-subtracted).
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let value = Tensor::new(xv.shape().to_vec(), softmax_flat(xv.data()));
        self.push(value, Op::Softmax { x })
    }

    /// Column-wise max over rows: (r×c) → (1×c).
    pub fn max_pool_rows(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        assert!(rows > 0, "max_pool_rows over an empty matrix");
        let mut best = vec![0u32; cols];
        let mut out = xv.row(0).to_vec();
        for r in 1..rows {
            for (c, &v) in xv.row(r).iter().enumerate() {
                if v > out[c] {
                    out[c] = v;
                    best[c] = r as u32;
                }
            }
        }
        let value = Tensor::matrix(1, cols, out);
        self.push(value, Op::MaxPoolRows { x, argmax: best })
    }

    /// Soft column selection: out[i] = Σ_j w[j] · cells[i·F + j] where
    /// `cells` is (rows·F)×d and `weights` has F entries.
    pub fn field_weighted_sum(&mut self, cells: NodeId, weights: NodeId, rows: usize) -> NodeId {
        let cv = self.value(cells);
        let wv = self.value(weights);
        let fields = wv.len();
        assert_eq!(
            cv.rows(),
            rows * fields,
            "shape mismatch in field_weighted_sum: {:?} vs {rows}·{fields} rows",
            cv.shape()
        );
        let d = cv.cols();
        let mut data = vec![0.0; rows * d];
        for i in 0..rows {
            let out_row = &mut data[i * d..(i + 1) * d];
            for (j, &w) in wv.data().iter().enumerate() {
                let cell = cv.row(i * fields + j);
                for (o, &c) in out_row.iter_mut().zip(cell) {
                    *o += w * c;
                }
            }
        }
        let value = Tensor::matrix(rows, d, data);
        self.push(value, Op::FieldWeightedSum { cells, weights, rows })
    }

    /// Marginalizes a flat (rows·fields) distribution over rows.
    pub fn field_marginal(&mut self, x: NodeId, fields: usize) -> NodeId {
        let xv = self.value(x);
        assert_eq!(
            xv.len() % fields,
            0,
            "shape mismatch in field_marginal: {:?} is not a multiple of {fields}",
            xv.shape()
        );
        let mut out = vec![0.0; fields];
        for (i, &v) in xv.data().iter().enumerate() {
            out[i % fields] += v;
        }
        self.push(Tensor::vector(out), Op::FieldMarginal { x, fields })
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll { x })
    }

    /// Fused −log softmax(logits)[target]; the numerically safe loss for
    /// classifier heads.
    pub fn cross_entropy_logits(&mut self, logits: NodeId, target: usize) -> NodeId {
        let lv = self.value(logits);
        assert!(
            target < lv.len(),
            "cross-entropy target {target} out of range for {} logits",
            lv.len()
        );
        let probs = softmax_flat(lv.data());
        let loss = log_sum_exp(lv.data()) - lv.data()[target];
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropyLogits { logits, target, probs },
        )
    }

    /// −Σ t·log p over explicit probabilities (index or full distribution).
    pub fn cross_entropy_probs(&mut self, probs: NodeId, target: Target) -> NodeId {
        let pv = self.value(probs);
        let loss = match &target {
            Target::Index(i) => {
                assert!(*i < pv.len(), "cross-entropy target {i} out of range");
                -pv.data()[*i].ln()
            }
            Target::Dist(t) => {
                assert_eq!(
                    t.len(),
                    pv.len(),
                    "shape mismatch in cross_entropy_probs: {} vs {:?}",
                    t.len(),
                    pv.shape()
                );
                -t.iter()
                    .zip(pv.data())
                    .filter(|(tv, _)| **tv != 0.0)
                    .map(|(tv, p)| tv * p.ln())
                    .sum::<f64>()
            }
        };
        self.push(Tensor::scalar(loss), Op::CrossEntropyProbs { probs, target })
    }

    pub fn add_scalars(&mut self, parts: &[NodeId]) -> NodeId {
        let sum: f64 = parts
            .iter()
            .map(|&p| {
                let v = self.value(p);
                assert!(v.is_scalar(), "add_scalars on non-scalar {:?}", v.shape());
                v.as_scalar()
            })
            .sum();
        self.push(Tensor::scalar(sum), Op::AddScalars { parts: parts.to_vec() })
    }

    /// Reverse pass from a scalar loss. Returns gradients for every
    /// parameter reachable from it; unreached parameters read as zeros.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert!(
            self.value(loss).is_scalar(),
            "backward requires a scalar loss, got shape {:?}",
            self.value(loss).shape()
        );
        self.backward_seeded(&[(loss, Tensor::scalar(1.0))])
    }

    /// Reverse pass seeded with explicit cotangents per node.
    pub fn backward_seeded(&self, seeds: &[(NodeId, Tensor)]) -> Gradients {
        let mut node_grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for (id, seed) in seeds {
            assert_eq!(
                self.value(*id).shape(),
                seed.shape(),
                "seed shape {:?} does not match node shape {:?}",
                seed.shape(),
                self.value(*id).shape()
            );
            match &mut node_grads[id.0] {
                Some(g) => g.add_assign(seed),
                slot => *slot = Some(seed.clone()),
            }
        }

        let mut grads = Gradients::zeros(self.store);

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = node_grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::LeafParam(param) => grads.accumulate_owned(*param, g),
                Op::Lookup { param, indices } => {
                    let table = self.store.value(*param);
                    let mut dt = Tensor::zeros_like(table);
                    let cols = table.cols();
                    for (r, &i) in indices.iter().enumerate() {
                        let src = g.row(r);
                        let dst = &mut dt.data_mut()[(i as usize) * cols..(i as usize + 1) * cols];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    grads.accumulate_owned(*param, dt);
                }
                Op::MatMul { a, b } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut da = Tensor::zeros_like(av);
                    matmul_nt_acc(&g, bv, &mut da);
                    accumulate_node(&mut node_grads, *a, da);
                    let mut db = Tensor::zeros_like(bv);
                    matmul_tn_acc(av, &g, &mut db);
                    accumulate_node(&mut node_grads, *b, db);
                }
                Op::MatMulNT { a, b } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    // out = a·bᵀ ⇒ da = g·b, db = gᵀ·a.
                    let mut da = Tensor::zeros_like(av);
                    super::tensor::matmul_acc(&g, bv, &mut da);
                    accumulate_node(&mut node_grads, *a, da);
                    let mut db = Tensor::zeros_like(bv);
                    matmul_tn_acc(&g, av, &mut db);
                    accumulate_node(&mut node_grads, *b, db);
                }
                Op::MatMulParam { x, w } => {
                    let xv = self.value(*x);
                    let wv = self.store.value(*w);
                    let mut dx = Tensor::zeros_like(xv);
                    matmul_nt_acc(&g, wv, &mut dx);
                    accumulate_node(&mut node_grads, *x, dx);
                    let mut dw = Tensor::zeros_like(wv);
                    matmul_tn_acc(xv, &g, &mut dw);
                    grads.accumulate_owned(*w, dw);
                }
                Op::AddBias { x, b } => {
                    let bias = self.store.value(*b);
                    let cols = bias.len();
                    let mut db = Tensor::zeros_like(bias);
                    for r in 0..g.rows() {
                        for (d, &s) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                    let _ = cols;
                    grads.accumulate_owned(*b, db);
                    accumulate_node(&mut node_grads, *x, g);
                }
                Op::Add { a, b } => {
                    accumulate_node(&mut node_grads, *a, g.clone());
                    accumulate_node(&mut node_grads, *b, g);
                }
                Op::Scale { x, c } => {
                    let mut dx = g;
                    dx.scale_assign(*c);
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::ConcatCols { parts } => {
                    let rows = node.value.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let pv = self.value(p);
                        let pc = pv.cols();
                        let mut dp = Tensor::zeros_like(pv);
                        for r in 0..rows {
                            let src = &g.row(r)[offset..offset + pc];
                            let dst = &mut dp.data_mut()[r * pc..(r + 1) * pc];
                            dst.copy_from_slice(src);
                        }
                        accumulate_node(&mut node_grads, p, dp);
                        offset += pc;
                    }
                }
                Op::BroadcastRow { x, n } => {
                    let xv = self.value(*x);
                    let cols = xv.cols();
                    let mut dx = Tensor::zeros_like(xv);
                    for r in 0..*n {
                        for (d, &s) in dx.data_mut().iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                    let _ = cols;
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::RepeatRowsEach { x, times } => {
                    let xv = self.value(*x);
                    let (rows, cols) = (xv.rows(), xv.cols());
                    let mut dx = Tensor::zeros_like(xv);
                    for r in 0..rows {
                        let dst = &mut dx.data_mut()[r * cols..(r + 1) * cols];
                        for t in 0..*times {
                            for (d, &s) in dst.iter_mut().zip(g.row(r * times + t)) {
                                *d += s;
                            }
                        }
                    }
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::Tanh { x } => {
                    let mut dx = g;
                    for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        *d *= 1.0 - y * y;
                    }
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::Sigmoid { x } => {
                    let mut dx = g;
                    for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        *d *= y * (1.0 - y);
                    }
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::Softmax { x } => {
                    let p = node.value.data();
                    let dot: f64 = p.iter().zip(g.data()).map(|(pv, gv)| pv * gv).sum();
                    let mut dx = g;
                    for (d, &pv) in dx.data_mut().iter_mut().zip(p) {
                        *d = pv * (*d - dot);
                    }
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::MaxPoolRows { x, argmax } => {
                    let xv = self.value(*x);
                    let cols = xv.cols();
                    let mut dx = Tensor::zeros_like(xv);
                    for (c, &r) in argmax.iter().enumerate() {
                        dx.data_mut()[(r as usize) * cols + c] += g.data()[c];
                    }
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::FieldWeightedSum { cells, weights, rows } => {
                    let cv = self.value(*cells);
                    let wv = self.value(*weights);
                    let fields = wv.len();
                    let d = cv.cols();
                    let mut dc = Tensor::zeros_like(cv);
                    let mut dw = Tensor::zeros_like(wv);
                    for i in 0..*rows {
                        let go = g.row(i);
                        for j in 0..fields {
                            let cell = cv.row(i * fields + j);
                            let dst = &mut dc.data_mut()[(i * fields + j) * d..(i * fields + j + 1) * d];
                            let w = wv.data()[j];
                            let mut acc = 0.0;
                            for ((dd, &gv), &cvv) in dst.iter_mut().zip(go).zip(cell) {
                                *dd += w * gv;
                                acc += gv * cvv;
                            }
                            dw.data_mut()[j] += acc;
                        }
                    }
                    accumulate_node(&mut node_grads, *cells, dc);
                    accumulate_node(&mut node_grads, *weights, dw);
                }
                Op::FieldMarginal { x, fields } => {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros_like(xv);
                    for (i, d) in dx.data_mut().iter_mut().enumerate() {
                        *d = g.data()[i % fields];
                    }
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::SumAll { x } => {
                    let s = g.as_scalar();
                    let mut dx = Tensor::zeros_like(self.value(*x));
                    for d in dx.data_mut() {
                        *d = s;
                    }
                    accumulate_node(&mut node_grads, *x, dx);
                }
                Op::CrossEntropyLogits { logits, target, probs } => {
                    let s = g.as_scalar();
                    let lv = self.value(*logits);
                    let mut dx = Tensor::zeros_like(lv);
                    for (d, &p) in dx.data_mut().iter_mut().zip(probs) {
                        *d = s * p;
                    }
                    dx.data_mut()[*target] -= s;
                    accumulate_node(&mut node_grads, *logits, dx);
                }
                Op::CrossEntropyProbs { probs, target } => {
                    let s = g.as_scalar();
                    let pv = self.value(*probs);
                    let mut dx = Tensor::zeros_like(pv);
                    match target {
                        Target::Index(i) => {
                            dx.data_mut()[*i] = -s / pv.data()[*i];
                        }
                        Target::Dist(t) => {
                            for ((d, &tv), &p) in
                                dx.data_mut().iter_mut().zip(t).zip(pv.data())
                            {
                                if tv != 0.0 {
                                    *d = -s * tv / p;
                                }
                            }
                        }
                    }
                    accumulate_node(&mut node_grads, *probs, dx);
                }
                Op::AddScalars { parts } => {
                    for &p in parts {
                        accumulate_node(&mut node_grads, p, g.clone());
                    }
                }
            }
        }
        grads
    }
}

fn accumulate_node(node_grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut node_grads[id.0] {
        Some(t) => t.add_assign(&delta),
        slot => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_of_param_has_unit_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let p = store.add_uniform("p", vec![3, 2], &mut rng);
        let mut tape = Tape::new(&store);
        let leaf = tape.leaf_param(p);
        let loss = tape.sum_all(leaf);
        let grads = tape.backward(loss);
        assert_eq!(grads.dense(&store, "p").data(), &[1.0; 6]);
    }

    #[test]
    fn unreached_parameter_reads_back_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let _a = store.add_uniform("a", vec![2], &mut rng);
        let b = store.add_uniform("b", vec![2], &mut rng);
        let mut tape = Tape::new(&store);
        let leaf = tape.leaf_param(b);
        let loss = tape.sum_all(leaf);
        let grads = tape.backward(loss);
        assert_eq!(grads.dense(&store, "a").data(), &[0.0, 0.0]);
        assert_eq!(grads.get(store.id("a").unwrap()).is_none(), true);
    }

    #[test]
    #[should_panic(expected = "scalar loss")]
    fn backward_rejects_non_scalar_loss() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.input(Tensor::vector(vec![1.0, 2.0]));
        let _ = tape.backward(x);
    }

    #[test]
    fn softmax_symmetry_and_normalization() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.input(Tensor::vector(vec![0.0, 0.0]));
        let p = tape.softmax(x);
        assert_eq!(tape.value(p).data(), &[0.5, 0.5]);
    }

    #[test]
    fn max_pool_of_constant_rows_is_that_row() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.input(Tensor::matrix(3, 2, vec![[1.5, -2.0]; 3].concat()));
        let m = tape.max_pool_rows(x);
        assert_eq!(tape.value(m).data(), &[1.5, -2.0]);
    }

    #[test]
    fn cross_entropy_logits_gradient_is_probs_minus_onehot() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let p = store.add_uniform("logits", vec![5], &mut rng);
        let mut tape = Tape::new(&store);
        let leaf = tape.leaf_param(p);
        let loss = tape.cross_entropy_logits(leaf, 2);
        let grads = tape.backward(loss);
        let got = grads.dense(&store, "logits");
        let probs = softmax_flat(store.value(p).data());
        for (i, (&g, &pr)) in got.data().iter().zip(&probs).enumerate() {
            let expect = if i == 2 { pr - 1.0 } else { pr };
            assert_relative_eq!(g, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn cross_entropy_through_explicit_softmax_matches_fused_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let p = store.add_uniform("logits", vec![4], &mut rng);

        let mut tape = Tape::new(&store);
        let leaf = tape.leaf_param(p);
        let sm = tape.softmax(leaf);
        let loss = tape.cross_entropy_probs(sm, Target::Index(1));
        let grads = tape.backward(loss);
        let composed = grads.dense(&store, "logits");

        let probs = softmax_flat(store.value(p).data());
        for (i, (&g, &pr)) in composed.data().iter().zip(&probs).enumerate() {
            let expect = if i == 1 { pr - 1.0 } else { pr };
            assert_relative_eq!(g, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn matmul_chain_gradient() {
        // loss = sum(x·W); d/dW = Σ_i x_i broadcast, d/dx = row sums of W.
        let mut store = ParamStore::new();
        let w = store.add_tensor("w", Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let mut tape = Tape::new(&store);
        let x = tape.input(Tensor::matrix(1, 2, vec![10.0, 20.0]));
        let y = tape.matmul_param(x, w);
        let loss = tape.sum_all(y);
        let grads = tape.backward(loss);
        assert_eq!(grads.dense(&store, "w").data(), &[10.0, 10.0, 10.0, 20.0, 20.0, 20.0]);
    }

    #[test]
    fn lookup_scatters_gradients_to_rows() {
        let mut store = ParamStore::new();
        let emb = store.add_tensor("emb", Tensor::matrix(4, 2, (0..8).map(|v| v as f64).collect()));
        let mut tape = Tape::new(&store);
        let rows = tape.lookup(emb, &[1, 3, 1]);
        let loss = tape.sum_all(rows);
        let grads = tape.backward(loss);
        // Row 1 gathered twice, row 3 once, rows 0/2 untouched.
        assert_eq!(
            grads.dense(&store, "emb").data(),
            &[0.0, 0.0, 2.0, 2.0, 0.0, 0.0, 1.0, 1.0]
        );
    }
}
