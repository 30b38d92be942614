//! Adam and the categorical cross-entropy objective.

mod adam;
mod loss;

pub use adam::{Adam, AdamConfig};
pub use loss::{loss_and_grad, one_hot, LossAndGrad};
