use std::collections::HashMap;

use super::record::Gradients;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub id: String,
    pub value: Tensor,
    pub gradient: Tensor,
}

/// Ordered, uniquely named parameters. Registration order is the
/// serialization order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: &str, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(id) {
            return Err(Error::Config(format!("duplicate parameter id {id:?}")));
        }
        let pid = ParamId(self.params.len());
        let gradient = Tensor::zeros(value.shape());
        self.params.push(Parameter {
            id: id.to_string(),
            value,
            gradient,
        });
        self.by_name.insert(id.to_string(), pid);
        Ok(pid)
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

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Adds `grads` into the stored parameter gradients.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in grads.iter() {
            for (dst, src) in self.params[id.0].gradient.values_mut().iter_mut().zip(g) {
                *dst += src;
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.gradient = Tensor::zeros(p.value.shape());
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.gradient.values())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    pub fn values_equal_bitwise(&self, other: &ParamSet) -> bool {
        self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| {
                a.id == b.id
                    && a.value.shape() == b.value.shape()
                    && a.value
                        .values()
                        .iter()
                        .zip(b.value.values())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
