//! Named parameter storage and the layer building blocks used by the
//! denoiser. Layers hold parameter ids plus hyperparameters; each training
//! step injects the parameters into a fresh tape and runs forward.

use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Ordered, named parameter set. Order is creation order and determines the
/// checkpoint layout and Adam state indexing.
pub struct ParamStore<S: Scalar> {
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
    trainable: Vec<bool>,
    index: HashMap<String, usize>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), tensors: Vec::new(), trainable: Vec::new(), index: HashMap::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> ParamId {
        self.add_with_trainable(name, tensor, true)
    }

    pub fn add_with_trainable(&mut self, name: impl Into<String>, tensor: Tensor<S>, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter name {name}");
        self.index.insert(name.clone(), self.tensors.len());
        self.names.push(name);
        self.tensors.push(tensor);
        self.trainable.push(trainable);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<S>)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (ParamId(i), n.as_str(), &self.tensors[i]))
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Creates one leaf per parameter on the tape, in store order.
    pub fn inject(&self, tape: &mut Tape<S>) -> Vec<Var> {
        self.tensors
            .iter()
            .zip(&self.trainable)
            .map(|(t, &trainable)| tape.leaf(t.clone(), trainable))
            .collect()
    }

    /// Copies gradients out of the tape in store order.
    pub fn collect_grads(&self, tape: &Tape<S>, vars: &[Var]) -> Vec<Vec<S>> {
        vars.iter().map(|&v| tape.grad(v).to_vec()).collect()
    }

    /// Converts every tensor to a different scalar type (f32 <-> f64).
    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        let mut out = ParamStore::new();
        for i in 0..self.tensors.len() {
            out.add_with_trainable(self.names[i].clone(), self.tensors[i].cast::<T>(), self.trainable[i]);
        }
        out
    }
}

pub struct Conv1dLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1dLayer {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        // Kaiming-style fan-in scaling.
        let std = (2.0 / (c_in * kernel) as f64).sqrt();
        let w = store.add(format!("{name}.w"), Tensor::randn(vec![c_out, c_in, kernel], std, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(vec![c_out]));
        Conv1dLayer { w, b, stride, padding }
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], x: Var) -> Var {
        tape.conv1d(x, params[self.w.0], params[self.b.0], self.stride, self.padding)
    }
}

pub struct LinearLayer {
    pub w: ParamId,
    pub b: ParamId,
}

impl LinearLayer {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        n_in: usize,
        n_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let std = (2.0 / n_in as f64).sqrt();
        let w = store.add(format!("{name}.w"), Tensor::randn(vec![n_out, n_in], std, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(vec![n_out]));
        LinearLayer { w, b }
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], x: Var) -> Var {
        tape.linear(x, params[self.w.0], params[self.b.0])
    }
}

pub struct GroupNormLayer {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub groups: usize,
    pub eps: f64,
}

impl GroupNormLayer {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, name: &str, channels: usize, groups: usize) -> Self {
        let gamma = store.add(format!("{name}.gamma"), Tensor::full(vec![channels], 1.0));
        let beta = store.add(format!("{name}.beta"), Tensor::zeros(vec![channels]));
        GroupNormLayer { gamma, beta, groups, eps: 1e-5 }
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], x: Var) -> Var {
        tape.group_norm(x, params[self.gamma.0], params[self.beta.0], self.groups, self.eps)
    }
}

/// Projects a conditioning vector into per-channel scale and shift for FiLM
/// modulation. The scale head is biased at one so the block starts near
/// identity; additive conditioning freezes the scale head at exactly one.
pub struct FilmHead {
    pub scale: LinearLayer,
    pub shift: LinearLayer,
    pub additive: bool,
}

impl FilmHead {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cond_dim: usize,
        channels: usize,
        additive: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let mut scale = LinearLayer::new(store, &format!("{name}.scale"), cond_dim, channels, rng);
        // Small weights + unit bias keep initial modulation near identity.
        if additive {
            // Freeze scale at one: film degenerates to a broadcast add.
            let id = store.add_with_trainable(
                format!("{name}.scale_frozen.w"),
                Tensor::zeros(vec![channels, cond_dim]),
                false,
            );
            let bias = store.add_with_trainable(
                format!("{name}.scale_frozen.b"),
                Tensor::full(vec![channels], 1.0),
                false,
            );
            scale = LinearLayer { w: id, b: bias };
        } else {
            for v in &mut store.tensor_mut(scale.w).data {
                *v = *v * S::from_f64(0.1);
            }
            store.tensor_mut(scale.b).data = vec![S::from_f64(1.0); channels];
        }
        let shift = LinearLayer::new(store, &format!("{name}.shift"), cond_dim, channels, rng);
        for v in &mut store.tensor_mut(shift.w).data {
            *v = *v * S::from_f64(0.1);
        }
        FilmHead { scale, shift, additive }
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], x: Var, cond: Var) -> Var {
        let scale = self.scale.forward(tape, params, cond);
        let shift = self.shift.forward(tape, params, cond);
        tape.film(x, scale, shift)
    }
}
