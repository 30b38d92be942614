//! CNN-SENet assembly, weight persistence, and classifier surgery.

mod network;
mod spec;
mod weights;

pub use network::{SenetModel, CLASSIFIER};
pub use spec::{Fingerprint, ModelSpec, StageShape, StageSpec, FULL_STAGES};
pub use weights::{decode, encode, load_weights, WeightsFile, FORMAT_VERSION, MAGIC};
