use std::collections::HashMap;

use jnrf_tensor::{Scalar, Tape, Tensor, Var};

use crate::error::{CoreError, Result};

/// Named, ordered trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor and returns its slot.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
        self.names.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalars.
    pub fn count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, slot: usize) -> &str {
        &self.names[slot]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor<T>] {
        &self.values
    }

    pub fn get(&self, slot: usize) -> &Tensor<T> {
        &self.values[slot]
    }

    pub fn get_mut(&mut self, slot: usize) -> &mut Tensor<T> {
        &mut self.values[slot]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.slot(name).map(|s| &self.values[s])
    }

    /// Replaces a value by name, checking the shape.
    pub fn assign(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = self
            .slot(name)
            .ok_or_else(|| CoreError::Checkpoint(format!("unknown parameter {name}")))?;
        let expected = self.values[slot].shape();
        if value.shape() != expected {
            return Err(CoreError::ParamShape {
                name: name.to_string(),
                expected,
                found: value.shape(),
            });
        }
        self.values[slot] = value;
        Ok(())
    }

    /// Records every parameter on `tape` as a trainable leaf, in slot order.
    pub fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.values.iter().map(|v| tape.param(v.clone())).collect()
    }

    pub fn zeros_like(&self) -> Vec<Tensor<T>> {
        self.values
            .iter()
            .map(|v| Tensor::zeros(v.rows(), v.cols()))
            .collect()
    }
}

/// Adds the tape gradients of `vars` into `acc`. Parameters the loss never
/// reached contribute nothing.
pub fn accumulate_grads<T: Scalar>(tape: &Tape<T>, vars: &[Var], acc: &mut [Tensor<T>]) -> Result<()> {
    for (v, a) in vars.iter().zip(acc.iter_mut()) {
        if let Some(g) = tape.grad(*v) {
            a.add_assign(g)?;
        }
    }
    Ok(())
}
