pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorClass, Result};
pub use model::{ModelSpec, SenetModel};
pub use tensor::{Real, Shape, Tape, Tensor, Var};
