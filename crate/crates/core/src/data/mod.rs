//! Image datasets: ingestion, resizing, splitting, augmentation, batching.

mod augment;
mod batch;
mod dataset;
mod image;
mod split;
mod synthetic;

pub use augment::{augment, AugmentConfig, AugmentParams};
pub use batch::{Batch, BatchOptions, BatchStream, ImageSet};
pub use dataset::{ingest, Dataset, IngestReport, Sample, Source};
pub use image::{Image, CHANNELS};
pub use split::{allocate, split, Assignment, Fractions, Split, SplitManifest, MANIFEST_VERSION};
pub use synthetic::SyntheticConfig;
