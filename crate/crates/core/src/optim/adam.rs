use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParameterStore;
use crate::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Inverse-time learning-rate decay, `lr / (1 + decay·(t−1))`.
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, decay: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Moments<T> {
    first: Vec<T>,
    second: Vec<T>,
}

/// Adam with bias-corrected moment estimates, one moment pair per named
/// trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T: Real = f32> {
    config: AdamConfig,
    step: u64,
    moments: IndexMap<String, Moments<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, moments: IndexMap::new() }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Updates every trainable parameter in place from its stored gradient,
    /// then clears the gradients. Fails before touching anything if any
    /// trainable parameter lacks a gradient.
    pub fn step(&mut self, params: &mut ParameterStore<T>) -> Result<()> {
        if let Some((name, _)) = params
            .iter()
            .find(|(_, p)| p.role.trainable() && p.tensor.grad().is_none())
        {
            return Err(Error::Training(format!("no gradient for trainable parameter {name}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let lr = c.lr / (1.0 + c.decay * (self.step - 1) as f64);
        let correct1 = T::of(1.0 - c.beta1.powi(t));
        let correct2 = T::of(1.0 - c.beta2.powi(t));
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (lr, eps) = (T::of(lr), T::of(c.epsilon));
        for (name, p) in params.iter_mut() {
            if !p.role.trainable() {
                continue;
            }
            let grad = p.tensor.take_grad().expect("checked above");
            let n = grad.len();
            let m = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| Moments { first: vec![T::zero(); n], second: vec![T::zero(); n] });
            if m.first.len() != n {
                *m = Moments { first: vec![T::zero(); n], second: vec![T::zero(); n] };
            }
            let values = p.tensor.data_mut();
            for i in 0..n {
                let g = grad[i];
                m.first[i] = b1 * m.first[i] + (T::one() - b1) * g;
                m.second[i] = b2 * m.second[i] + (T::one() - b2) * g * g;
                let m_hat = m.first[i] / correct1;
                let v_hat = m.second[i] / correct2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamRole;
    use crate::tensor::Tensor;

    fn scalar_store(w: f64, g: f64) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::scalar(w), ParamRole::Weight).unwrap();
        s.tensor_mut("w").unwrap().set_grad(vec![g]).unwrap();
        s
    }

    /// Plain scalar transcription of the update rule, used as the oracle.
    fn scalar_adam(mut w: f64, grads: &[f64], c: &AdamConfig) -> f64 {
        let (mut m, mut v) = (0.0, 0.0);
        for (i, &g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = c.beta1 * m + (1.0 - c.beta1) * g;
            v = c.beta2 * v + (1.0 - c.beta2) * g * g;
            let mh = m / (1.0 - c.beta1.powi(t));
            let vh = v / (1.0 - c.beta2.powi(t));
            w -= c.lr * mh / (vh.sqrt() + c.epsilon);
        }
        w
    }

    #[test]
    fn first_step_from_unit_gradient() {
        let mut store = scalar_store(0.0, 1.0);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut store).unwrap();
        let w = store.tensor("w").unwrap().data()[0];
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((w - expected).abs() < 1e-15, "{w} vs {expected}");
        assert_eq!(adam.step_count(), 1);
        assert!(store.tensor("w").unwrap().grad().is_none());
    }

    #[test]
    fn matches_scalar_oracle_over_several_steps() {
        let grads = [0.3, -1.2, 0.7, 2.5, -0.1];
        let c = AdamConfig::default();
        let mut store = scalar_store(0.5, grads[0]);
        let mut adam = Adam::new(c);
        for (i, &g) in grads.iter().enumerate() {
            if i > 0 {
                store.tensor_mut("w").unwrap().set_grad(vec![g]).unwrap();
            }
            adam.step(&mut store).unwrap();
        }
        let w = store.tensor("w").unwrap().data()[0];
        assert!((w - scalar_adam(0.5, &grads, &c)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut store = scalar_store(0.25, 0.0);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut store).unwrap();
        assert_eq!(store.tensor("w").unwrap().data()[0], 0.25);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut store = scalar_store(0.25, 3.0);
        let mut adam = Adam::new(AdamConfig { lr: 0.0, ..Default::default() });
        adam.step(&mut store).unwrap();
        assert_eq!(store.tensor("w").unwrap().data()[0], 0.25);
    }

    #[test]
    fn missing_gradient_names_parameter() {
        let mut store = scalar_store(0.0, 1.0);
        store.insert("layer/bias", Tensor::scalar(0.0), ParamRole::Bias).unwrap();
        store.insert("bn/running_mean", Tensor::scalar(0.0), ParamRole::RunningMean).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        let err = adam.step(&mut store).unwrap_err().to_string();
        assert!(err.contains("layer/bias"), "{err}");
        assert_eq!(adam.step_count(), 0);
        assert_eq!(store.tensor("w").unwrap().data()[0], 0.0);
    }
}
