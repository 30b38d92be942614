//! Transfer: pre-train on six source classes, then post-train on three
//! unseen target classes from the saved weights. Post-training replaces
//! the classifier, keeps every other weight, and evaluates the final epoch.
//! The target run is repeated over three seeds on one split.
//!
//!     cargo run --release --example transfer

use senet::data::{split, Dataset, Fractions, ImageSet, SyntheticConfig};
use senet::model::ModelSpec;
use senet::train::{pretrain, repeat_runs, Protocol, TrainConfig};

fn main() -> senet::Result<()> {
    let dir = out_dir("senet-transfer");
    let all = SyntheticConfig { classes: 9, per_class: 24, seed: 3, ..SyntheticConfig::default() }.images()?;
    let (source, target): (Vec<_>, Vec<_>) = all.into_iter().enumerate().partition(|(i, _)| *i < 6);
    let strip = |v: Vec<(usize, _)>| v.into_iter().map(|(_, g)| g).collect::<Vec<_>>();

    let source = Dataset::from_images(strip(source))?;
    let source_set = ImageSet::new(source.clone(), split(&source, 0, Fractions::default())?, 32, 32)?;
    let pre_cfg = TrainConfig { epochs: 25, seed: 1, ..TrainConfig::pretrain(ModelSpec::desk_scale(6)) };
    let pre = pretrain(&pre_cfg, &source_set, Some(&dir.join("pretrain")))?;
    println!("source: 6 classes, test accuracy {:.3}", pre.test_accuracy);

    let target = Dataset::from_images(strip(target))?;
    let target_set = ImageSet::new(target.clone(), split(&target, 0, Fractions::default())?, 32, 32)?;
    let weights = dir.join("pretrain/weights.bin");
    let post_cfg = TrainConfig { epochs: 15, seed: 10, ..TrainConfig::posttrain(ModelSpec::desk_scale(3), &weights) };
    let record = repeat_runs(Protocol::Posttrain, &post_cfg, &target_set, 3, Some(&dir.join("posttrain")))?;
    for run in &record.runs {
        println!("target seed {}: epoch {}, test accuracy {:.3}", run.seed, run.selected_epoch, run.test_accuracy);
    }
    println!("mean target accuracy {:.3}; results in {}", record.mean_test_accuracy, dir.display());
    Ok(())
}

fn out_dir(name: &str) -> std::path::PathBuf {
    std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join(name))
}
