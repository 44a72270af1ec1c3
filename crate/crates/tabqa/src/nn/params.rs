//! Named parameter storage with per-parameter optimizer state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use super::tensor::Tensor;

/// Range of the seeded uniform initializer.
pub const INIT_RANGE: f64 = 0.08;

/// Index of a parameter inside its [`ParamStore`]; stable for the lifetime
/// of the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Tensor,
    /// AdaDelta accumulated squared gradient.
    acc_grad: Tensor,
    /// AdaDelta accumulated squared update.
    acc_update: Tensor,
}

/// All learnable parameters of one model, with AdaDelta state.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    fn insert(&mut self, name: String, value: Tensor) -> ParamId {
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name `{name}`"
        );
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        let acc_grad = Tensor::zeros_like(&value);
        let acc_update = Tensor::zeros_like(&value);
        self.params.push(Param { name, value, acc_grad, acc_update });
        id
    }

    /// Adds a parameter initialized uniformly in `[-INIT_RANGE, INIT_RANGE]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE)).collect();
        self.insert(name.into(), Tensor::new(shape, data))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        self.insert(name.into(), Tensor::zeros(shape))
    }

    pub fn add_tensor(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.insert(name.into(), value)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor) {
        assert_eq!(
            self.params[id.0].value.shape(),
            value.shape(),
            "parameter `{}` shape mismatch",
            self.params[id.0].name
        );
        self.params[id.0].value = value;
    }

    /// Parameter ids in registration order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// (name, tensor) pairs in registration order.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
    }

    /// Copies values (and fresh optimizer state) from a checkpoint listing.
    /// Every stored parameter must be present with a matching shape.
    pub fn load_named_tensors(&mut self, tensors: &[(String, Tensor)]) -> Result<(), String> {
        let lookup: HashMap<&str, &Tensor> =
            tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        for p in &mut self.params {
            let t = lookup
                .get(p.name.as_str())
                .ok_or_else(|| format!("checkpoint is missing parameter `{}`", p.name))?;
            if t.shape() != p.value.shape() {
                return Err(format!(
                    "checkpoint shape {:?} for `{}` does not match model shape {:?}",
                    t.shape(),
                    p.name,
                    p.value.shape()
                ));
            }
            p.value = (*t).clone();
            p.acc_grad = Tensor::zeros_like(&p.value);
            p.acc_update = Tensor::zeros_like(&p.value);
        }
        Ok(())
    }

    pub(crate) fn adadelta_state(&mut self, id: ParamId) -> (&mut Tensor, &mut Tensor, &mut Tensor) {
        let p = &mut self.params[id.0];
        (&mut p.value, &mut p.acc_grad, &mut p.acc_update)
    }

    /// Raw little-endian bytes of one parameter's values, for
    /// touched/untouched assertions in tests.
    pub fn value_bytes(&self, id: ParamId) -> Vec<u8> {
        self.params[id.0]
            .value
            .data()
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }
}

/// Per-parameter gradients, keyed by [`ParamId`]; parameters the loss never
/// reached stay `None` and read back as zeros.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn zeros(store: &ParamStore) -> Self {
        Gradients { grads: vec![None; store.len()] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// The gradient for `name`, materializing zeros for unreached
    /// parameters.
    pub fn dense(&self, store: &ParamStore, name: &str) -> Tensor {
        let id = store.id(name).unwrap_or_else(|| panic!("unknown parameter `{name}`"));
        match &self.grads[id.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros_like(store.value(id)),
        }
    }

    pub fn accumulate(&mut self, id: ParamId, delta: &Tensor) {
        match &mut self.grads[id.0] {
            Some(t) => t.add_assign(delta),
            slot => *slot = Some(delta.clone()),
        }
    }

    pub(crate) fn accumulate_owned(&mut self, id: ParamId, delta: Tensor) {
        match &mut self.grads[id.0] {
            Some(t) => t.add_assign(&delta),
            slot => *slot = Some(delta),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(bt) = b {
                match a {
                    Some(at) => at.add_assign(bt),
                    slot => *slot = Some(bt.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.scale_assign(c);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|t| t.data().iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
