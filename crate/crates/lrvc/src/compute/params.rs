use std::collections::HashMap;

use crate::compute::tape::{NodeId, Tape};
use crate::compute::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Trainable parameter: current value plus a same-shape gradient buffer.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor<f32>,
    pub grad: Tensor<f32>,
}

/// Index of a parameter within its `ParamStore`; stable across steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    /// Position in store order; also the index into `ParamStore::bind`'s
    /// returned bindings.
    pub fn index(self) -> usize {
        self.0
    }

    pub fn from_index(index: usize) -> Self {
        ParamId(index)
    }
}

/// Ordered set of trainable parameters. Insertion order is the canonical
/// order used for checkpoints, optimizer state, and gradient reduction, so
/// training stays deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<f32>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Internal(format!("duplicate parameter name {name}")));
        }
        let grad = Tensor::zeros(value.shape().to_vec());
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.by_name.get(name).map(|&i| &self.params[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_entries(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g = 0.0;
            }
        }
    }

    /// Register every parameter value as a tape leaf; returns node ids in
    /// store order so `ParamId(i)` maps to `bindings[i]`.
    pub fn bind<T: Real>(&self, tape: &mut Tape<T>) -> Vec<NodeId> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.value.cast::<T>()))
            .collect()
    }

    /// Add tape gradients (scaled by `scale`) into the stored grad buffers.
    pub fn accumulate_from_tape(
        &mut self,
        tape: &Tape<f32>,
        bindings: &[NodeId],
        scale: f32,
    ) -> Result<()> {
        if bindings.len() != self.params.len() {
            return Err(Error::Internal(format!(
                "binding count {} != param count {}",
                bindings.len(),
                self.params.len()
            )));
        }
        for (p, &node) in self.params.iter_mut().zip(bindings) {
            if let Some(g) = tape.grad(node) {
                for (dst, &src) in p.grad.data_mut().iter_mut().zip(g) {
                    *dst += src * scale;
                }
            }
        }
        Ok(())
    }
}
