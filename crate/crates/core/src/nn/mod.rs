//! Stateful layers with named parameters.

mod init;
mod layer;
mod params;
mod se;

pub use init::{derive_seed, layer_rng, Init};
pub use layer::{Activation, BatchNormConfig, Forward, Layer, LayerSpec};
pub use params::{Param, ParamRole, ParameterStore};
pub use se::{se_block_forward, se_gate, se_hidden_width, SeWeights};
