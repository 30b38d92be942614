use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::SenetModel;
use crate::tensor::{Real, Tensor};

/// One-hot encoding of class indices as an `N×C` tensor.
pub fn one_hot<T: Real>(labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    let mut data = vec![T::zero(); labels.len() * classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Data(format!("label {l} at batch index {i} out of range for {classes} classes")));
        }
        data[i * classes + l] = T::one();
    }
    Tensor::new(vec![labels.len(), classes], data)
}

#[derive(Clone, Debug)]
pub struct LossAndGrad<T> {
    /// Mean categorical cross-entropy over the batch.
    pub loss: f64,
    /// Softmax probabilities of the same pass.
    pub probs: Tensor<T>,
}

/// Training-mode forward pass, cross-entropy, and backward sweep. Gradients
/// land on the model's parameters, ready for an optimizer step.
pub fn loss_and_grad<T: Real>(
    model: &mut SenetModel<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    rng: &mut dyn RngCore,
) -> Result<LossAndGrad<T>> {
    if batch.dims()[0] != labels.len() {
        return Err(Error::Data(format!("{} labels for a batch of {}", labels.len(), batch.dims()[0])));
    }
    let targets = one_hot::<T>(labels, model.num_classes())?;
    model.params_mut().clear_grads();
    model.with_forward(batch, true, rng, |ctx, logits| {
        let loss = ctx.tape.softmax_cross_entropy(logits, &targets)?;
        let value = ctx.tape.value(loss).data()[0].as_f64();
        let probs = ctx.tape.softmax(logits)?;
        let probs = ctx.tape.value(probs).clone();
        ctx.backward(loss)?;
        Ok(LossAndGrad { loss: value, probs })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_rejects_out_of_range() {
        let err = one_hot::<f32>(&[0, 4, 1], 4).unwrap_err().to_string();
        assert!(err.contains("label 4") && err.contains("index 1"), "{err}");
        let t = one_hot::<f32>(&[2, 0], 3).unwrap();
        assert_eq!(t.data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }
}
