//! Pre-training from scratch on a synthetic four-class set at 32×32, with
//! best-validation checkpoint selection and a full run directory.
//!
//!     cargo run --release --example pretrain [-- OUT_DIR]

use std::path::PathBuf;

use senet::data::{split, Fractions, ImageSet, SyntheticConfig};
use senet::model::ModelSpec;
use senet::train::{pretrain, TrainConfig};

fn main() -> senet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("senet-pretrain"));

    let dataset = SyntheticConfig { per_class: 30, ..SyntheticConfig::default() }.generate()?;
    let manifest = split(&dataset, 0, Fractions::default())?;
    let set = ImageSet::new(dataset, manifest, 32, 32)?;

    let config = TrainConfig { epochs: 30, seed: 1, ..TrainConfig::pretrain(ModelSpec::desk_scale(4)) };
    let outcome = pretrain(&config, &set, Some(&out))?;
    println!(
        "selected epoch {} of {}, test accuracy {:.3}",
        outcome.selected_epoch,
        outcome.reports.len(),
        outcome.test_accuracy
    );
    print!("{}", outcome.confusion.to_csv());
    println!("run directory: {}", out.display());
    Ok(())
}
