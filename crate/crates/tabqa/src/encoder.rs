//! Bi-directional recurrent query encoder shared by both executors
//! (same architecture, separate parameters).

use rand_chacha::ChaCha8Rng;

use crate::nn::{NodeId, ParamId, ParamStore, Tape, Tensor};

/// Parameter handles for one bi-directional single-layer tanh RNN.
#[derive(Debug, Clone)]
pub struct BiRnnEncoder {
    fwd_wx: ParamId,
    fwd_wh: ParamId,
    fwd_b: ParamId,
    bwd_wx: ParamId,
    bwd_wh: ParamId,
    bwd_b: ParamId,
    hidden: usize,
}

impl BiRnnEncoder {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        word_dim: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut p = |suffix: &str, shape: Vec<usize>| {
            store.add_uniform(format!("{prefix}.{suffix}"), shape, rng)
        };
        BiRnnEncoder {
            fwd_wx: p("fwd.wx", vec![word_dim, hidden]),
            fwd_wh: p("fwd.wh", vec![hidden, hidden]),
            fwd_b: p("fwd.b", vec![hidden]),
            bwd_wx: p("bwd.wx", vec![word_dim, hidden]),
            bwd_wh: p("bwd.wh", vec![hidden, hidden]),
            bwd_b: p("bwd.b", vec![hidden]),
            hidden,
        }
    }

    /// Output dimension: the two directions' final states concatenated.
    pub fn out_dim(&self) -> usize {
        2 * self.hidden
    }

    fn run_direction(
        &self,
        tape: &mut Tape<'_>,
        embeddings: &[NodeId],
        wx: ParamId,
        wh: ParamId,
        b: ParamId,
        reversed: bool,
    ) -> NodeId {
        let mut h = tape.input(Tensor::matrix(1, self.hidden, vec![0.0; self.hidden]));
        let order: Vec<usize> = if reversed {
            (0..embeddings.len()).rev().collect()
        } else {
            (0..embeddings.len()).collect()
        };
        for i in order {
            let xin = tape.matmul_param(embeddings[i], wx);
            let hin = tape.matmul_param(h, wh);
            let sum = tape.add(xin, hin);
            let biased = tape.add_bias(sum, b);
            h = tape.tanh(biased);
        }
        h
    }

    /// Encodes a non-empty token-embedding sequence into a (1 × 2·hidden)
    /// query vector.
    pub fn encode(&self, tape: &mut Tape<'_>, embeddings: &[NodeId]) -> NodeId {
        assert!(!embeddings.is_empty(), "encoder requires at least one token");
        let fwd = self.run_direction(tape, embeddings, self.fwd_wx, self.fwd_wh, self.fwd_b, false);
        let bwd = self.run_direction(tape, embeddings, self.bwd_wx, self.bwd_wh, self.bwd_b, true);
        tape.concat_cols(&[fwd, bwd])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn single_token_concatenates_both_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let enc = BiRnnEncoder::register(&mut store, "enc", 4, 3, &mut rng);
        let mut tape = Tape::new(&store);
        let x = tape.input(Tensor::matrix(1, 4, vec![0.1, -0.2, 0.3, 0.4]));
        let q = enc.encode(&mut tape, &[x]);
        assert_eq!(tape.value(q).shape(), &[1, 6]);

        // Deterministic: the same input yields the same vector.
        let mut tape2 = Tape::new(&store);
        let x2 = tape2.input(Tensor::matrix(1, 4, vec![0.1, -0.2, 0.3, 0.4]));
        let q2 = enc.encode(&mut tape2, &[x2]);
        assert_eq!(tape.value(q).data(), tape2.value(q2).data());
    }
}
