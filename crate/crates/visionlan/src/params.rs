//! Named model parameters partitioned into backbone / mlm / vrm groups.

use crate::error::{Result, VlanError};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};
use std::collections::HashMap;

/// Which part of the model a parameter belongs to. The extra-parameter
/// accounting for the inference graph is defined over this partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Backbone,
    Mlm,
    Vrm,
}

impl ParamGroup {
    pub fn from_name(name: &str) -> Result<ParamGroup> {
        if name.starts_with("backbone.") {
            Ok(ParamGroup::Backbone)
        } else if name.starts_with("mlm.") {
            Ok(ParamGroup::Mlm)
        } else if name.starts_with("vrm.") {
            Ok(ParamGroup::Vrm)
        } else {
            Err(VlanError::Config(format!("parameter name '{name}' has no group prefix")))
        }
    }
}

/// Stable handle into a [`ModelParams`] collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One named parameter: value plus an accumulated gradient of equal shape.
#[derive(Debug, Clone)]
pub struct Parameter<S: Scalar> {
    pub name: String,
    pub group: ParamGroup,
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
}

/// Ordered collection of uniquely named parameters.
#[derive(Debug, Clone)]
pub struct ModelParams<S: Scalar> {
    entries: Vec<Parameter<S>>,
    by_name: HashMap<String, ParamId>,
}

impl<S: Scalar> Default for ModelParams<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ModelParams<S> {
    pub fn new() -> Self {
        ModelParams { entries: Vec::new(), by_name: HashMap::new() }
    }

    pub fn register(&mut self, name: &str, value: Tensor<S>) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(VlanError::Config(format!("duplicate parameter name '{name}'")));
        }
        let group = ParamGroup::from_name(name)?;
        let id = ParamId(self.entries.len());
        let grad = Tensor::zeros(value.shape().to_vec());
        self.entries.push(Parameter { name: name.to_string(), group, value, grad });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn group(&self, id: ParamId) -> ParamGroup {
        self.entries[id.0].group
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<S> {
        &self.entries[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<S>)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    /// Total number of scalar elements, optionally restricted to one group.
    pub fn element_count(&self, group: Option<ParamGroup>) -> usize {
        self.entries
            .iter()
            .filter(|p| group.map_or(true, |g| p.group == g))
            .map(|p| p.value.numel())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.data_mut().iter_mut().for_each(|v| *v = S::ZERO);
        }
    }

    /// Adds `scale * grad` into the stored gradient for `id`.
    pub fn accumulate_grad(&mut self, id: ParamId, grad: &Tensor<S>, scale: S) {
        let dst = &mut self.entries[id.0].grad;
        debug_assert_eq!(dst.shape(), grad.shape());
        for (d, &g) in dst.data_mut().iter_mut().zip(grad.data().iter()) {
            *d += g * scale;
        }
    }

    /// Global L2 norm of all gradients.
    pub fn grad_norm(&self) -> f64 {
        let mut acc = 0.0f64;
        for p in &self.entries {
            for &g in p.grad.data() {
                let g = g.to_f64();
                acc += g * g;
            }
        }
        acc.sqrt()
    }

    /// Converts the collection to another element type.
    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        let mut out = ModelParams::new();
        for p in &self.entries {
            out.register(&p.name, p.value.cast::<T>()).expect("names stay unique");
        }
        out
    }
}

/// Fan-in-scaled uniform initializer: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn init_uniform<S: Scalar>(rng: &mut Rng, shape: Vec<usize>, fan_in: usize) -> Tensor<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| S::from_f64(rng.uniform(-bound, bound)))
}
