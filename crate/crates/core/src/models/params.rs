use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::kernels::{glorot_uniform, AdamState, Graph, Tensor, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Named trainable tensors of one network, in registration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Total scalar count.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Fresh optimizer state sized for `ids`.
    pub fn optimizer(&self, ids: &[ParamId], config: crate::kernels::AdamConfig) -> AdamState {
        let sizes: Vec<usize> = ids.iter().map(|&id| self.get(id).len()).collect();
        AdamState::new(config, &sizes)
    }

    /// One optimizer step on `ids` using the gradients left on `graph` by
    /// a backward pass. Parameters without a gradient see zeros.
    pub fn apply_gradients(&mut self, ids: &[ParamId], graph: &Graph, bound: &Bound, optimizer: &mut AdamState) {
        let grads: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| match graph.grad(bound.get(id)) {
                Some(g) => g.to_vec(),
                None => alloc::vec![0.0; self.get(id).len()],
            })
            .collect();
        let mut slots: Vec<Option<&mut [f64]>> = self.tensors.iter_mut().map(|t| Some(t.data_mut())).collect();
        let mut tensors: Vec<&mut [f64]> = ids
            .iter()
            .map(|id| slots[id.0].take().expect("parameter ids are distinct"))
            .collect();
        let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        optimizer.step(&mut tensors, &grad_refs);
    }

    /// Places every tensor on the tape as a differentiable leaf.
    pub fn bind(&self, graph: &mut Graph) -> Bound {
        Bound(self.tensors.iter().map(|t| graph.param(t.clone())).collect())
    }

    /// Places every tensor on the tape as a constant (inference).
    pub fn bind_frozen(&self, graph: &mut Graph) -> Bound {
        Bound(self.tensors.iter().map(|t| graph.constant(t.clone())).collect())
    }
}

/// Tape handles for a [`ParamStore`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<Value>);

impl Bound {
    pub fn get(&self, id: ParamId) -> Value {
        self.0[id.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Conv {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(
            alloc::format!("{name}.weight"),
            glorot_uniform(&[cout, cin, k], cin * k, cout * k, rng),
        );
        let bias = store.add(alloc::format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { weight, bias }
    }

    pub fn apply(&self, g: &mut Graph, p: &Bound, x: Value) -> crate::Result<Value> {
        g.conv1d(x, p.get(self.weight), p.get(self.bias))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, fin: usize, fout: usize, rng: &mut R) -> Self {
        let weight = store.add(
            alloc::format!("{name}.weight"),
            glorot_uniform(&[fout, fin], fin, fout, rng),
        );
        let bias = store.add(alloc::format!("{name}.bias"), Tensor::zeros(&[fout]));
        Self { weight, bias }
    }

    pub fn apply(&self, g: &mut Graph, p: &Bound, x: Value) -> crate::Result<Value> {
        g.dense(x, p.get(self.weight), p.get(self.bias))
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Affine {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl Affine {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        let gamma = store.add(alloc::format!("{name}.gamma"), Tensor::filled(&[channels], 1.0));
        let beta = store.add(alloc::format!("{name}.beta"), Tensor::zeros(&[channels]));
        Self { gamma, beta }
    }
}
