//! Synthetic image tree, ingestion, stratified split, and augmented
//! training batches.
//!
//!     cargo run --example data_pipeline [-- OUT_DIR]

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use senet::data::{augment, ingest, split, AugmentConfig, BatchOptions, Fractions, ImageSet, Split, SyntheticConfig};

fn main() -> senet::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("senet-data"));
    let tree = out.join("images");
    SyntheticConfig { classes: 3, per_class: 12, ..SyntheticConfig::default() }.write_tree(&tree)?;

    let (dataset, report) = ingest(&tree)?;
    println!("{} images in {:?}, {} skipped", dataset.len(), dataset.class_names(), report.skipped.len());

    let manifest = split(&dataset, 0, Fractions::default())?;
    for (name, counts) in dataset.class_names().iter().zip(manifest.class_counts()) {
        println!("  {name}: train {} / validation {} / test {}", counts[0], counts[1], counts[2]);
    }
    manifest.save(&out.join("manifest.json"))?;

    let set = ImageSet::new(dataset, manifest, 32, 32)?;
    let opts = BatchOptions {
        batch_size: 8,
        shuffle: Some(1),
        augment: Some(AugmentConfig::default()),
        augment_seed: 2,
    };
    for batch in set.batches(Split::Train, &opts) {
        let batch = batch?;
        println!("batch {:?} labels {:?}", batch.images.dims(), batch.labels);
    }
    println!("reads: train {}, test {}", set.accesses(Split::Train), set.accesses(Split::Test));

    let original = set.image(0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..3 {
        augment(&original, &AugmentConfig::default(), &mut rng).save_png(&out.join(format!("augmented_{k}.png")))?;
    }
    original.save_png(&out.join("original.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
