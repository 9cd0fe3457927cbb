//! Named tensor store for network parameters.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::unet::ModelSpec;
use crate::{Error, Result};

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(alloc::format!(
                "tensor shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(NamedTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        NamedTensor { shape, data: alloc::vec![0.0; n] }
    }
}

/// Ordered map of parameter tensors plus the architecture they belong to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightContainer {
    pub spec: Option<ModelSpec>,
    tensors: BTreeMap<String, NamedTensor>,
}

/// Serializable description of one tensor inside a weight file payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: u64,
    /// Byte length, `product(shape) * 4`.
    pub nbytes: u64,
}

impl WeightContainer {
    pub fn new(spec: Option<ModelSpec>) -> Self {
        WeightContainer { spec, tensors: BTreeMap::new() }
    }

    /// Insert a tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: NamedTensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::input(alloc::format!("duplicate tensor name `{name}`")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors.get(name).ok_or_else(|| Error::MissingTensor(name.into()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut NamedTensor> {
        self.tensors.get_mut(name).ok_or_else(|| Error::MissingTensor(name.into()))
    }

    /// Tensor data, checking its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&[f32]> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(Error::shape(alloc::format!(
                "tensor `{name}` has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        Ok(&t.data)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &NamedTensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn n_params(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    /// Payload layout in name order, tightly packed.
    pub fn layout(&self) -> Vec<TensorEntry> {
        let mut offset = 0u64;
        self.tensors
            .iter()
            .map(|(name, t)| {
                let nbytes = 4 * t.data.len() as u64;
                let e = TensorEntry { name: name.clone(), shape: t.shape.clone(), offset, nbytes };
                offset += nbytes;
                e
            })
            .collect()
    }
}
