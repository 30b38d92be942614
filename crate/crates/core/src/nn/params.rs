use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// What a stored tensor is for. Running statistics are persisted with the
/// weights but never updated by the optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Weight,
    Bias,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
}

impl ParamRole {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamRole::RunningMean | ParamRole::RunningVar)
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamRole::Weight => "weight",
            ParamRole::Bias => "bias",
            ParamRole::Gamma => "gamma",
            ParamRole::Beta => "beta",
            ParamRole::RunningMean => "running_mean",
            ParamRole::RunningVar => "running_var",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            ParamRole::Weight => 0,
            ParamRole::Bias => 1,
            ParamRole::Gamma => 2,
            ParamRole::Beta => 3,
            ParamRole::RunningMean => 4,
            ParamRole::RunningVar => 5,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ParamRole::Weight,
            1 => ParamRole::Bias,
            2 => ParamRole::Gamma,
            3 => ParamRole::Beta,
            4 => ParamRole::RunningMean,
            5 => ParamRole::RunningVar,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub tensor: Tensor<T>,
    pub role: ParamRole,
}

/// Named, insertion-ordered collection of model tensors. Names are
/// hierarchical (`stage1/conv/kernel`) and unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore<T: Real = f32> {
    entries: IndexMap<String, Param<T>>,
}

impl<T: Real> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore { entries: IndexMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>, role: ParamRole) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Spec(format!("duplicate parameter name {name}")));
        }
        let tensor = tensor.with_requires_grad(role.trainable());
        self.entries.insert(name, Param { tensor, role });
        Ok(())
    }

    /// Removes an entry, keeping the order of the remaining ones.
    pub fn remove(&mut self, name: &str) -> Option<Param<T>> {
        self.entries.shift_remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.entries.get_mut(name)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor<T>> {
        self.entries
            .get(name)
            .map(|p| &p.tensor)
            .ok_or_else(|| Error::Spec(format!("missing parameter {name}")))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.tensor)
            .ok_or_else(|| Error::Spec(format!("missing parameter {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Number of scalars the optimizer updates.
    pub fn trainable_count(&self) -> usize {
        self.entries.values().filter(|p| p.role.trainable()).map(|p| p.tensor.len()).sum()
    }

    /// Number of stored scalars, running statistics included.
    pub fn total_count(&self) -> usize {
        self.entries.values().map(|p| p.tensor.len()).sum()
    }

    pub fn clear_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.tensor.clear_grad();
        }
    }

    /// Hex SHA-256 over names, shapes and raw little-endian values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, p) in &self.entries {
            h.update(name.as_bytes());
            for d in p.tensor.dims() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in p.tensor.data() {
                h.update(v.as_f64().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_ordered() {
        let mut s = ParameterStore::<f32>::new();
        s.insert("b", Tensor::zeros(vec![2]).unwrap(), ParamRole::Bias).unwrap();
        s.insert("a", Tensor::zeros(vec![3]).unwrap(), ParamRole::Weight).unwrap();
        assert!(s.insert("a", Tensor::zeros(vec![1]).unwrap(), ParamRole::Weight).is_err());
        assert_eq!(s.names().collect::<Vec<_>>(), ["b", "a"]);
        s.insert("rm", Tensor::zeros(vec![4]).unwrap(), ParamRole::RunningMean).unwrap();
        assert_eq!(s.trainable_count(), 5);
        assert_eq!(s.total_count(), 9);
        assert!(!s.get("rm").unwrap().tensor.requires_grad());
        assert!(s.get("a").unwrap().tensor.requires_grad());
    }

    #[test]
    fn role_tags_round_trip() {
        for role in [
            ParamRole::Weight,
            ParamRole::Bias,
            ParamRole::Gamma,
            ParamRole::Beta,
            ParamRole::RunningMean,
            ParamRole::RunningVar,
        ] {
            assert_eq!(ParamRole::from_tag(role.tag()), Some(role));
        }
        assert_eq!(ParamRole::from_tag(9), None);
    }
}
