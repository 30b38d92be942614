use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::trainer::{RunOutcome, Trainer};
use crate::data::{ImageSet, Split};
use crate::error::{Error, Result};
use crate::metrics::{epochs_csv, write_json, write_text, ConfusionMatrix};
use crate::model::{load_weights, SenetModel};
use crate::nn::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Fresh initialization.
    Pretrain,
    /// Loaded weights with a replaced classifier.
    Posttrain,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Pretrain => "pretrain",
            Protocol::Posttrain => "posttrain",
        }
    }
}

/// Per-epoch figures without wall-clock time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Contents of `run.json`. Holds only values that are reproducible from
/// the config, data and seed; timings live in `timing.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub protocol: Protocol,
    pub config: TrainConfig,
    pub class_names: Vec<String>,
    pub split_seed: u64,
    pub split_counts: SplitCounts,
    pub epochs: Vec<EpochSummary>,
    pub selected_epoch: usize,
    pub test_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub weights_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub epoch_seconds: Vec<f64>,
    pub mean_epoch_seconds: f64,
    pub total_seconds: f64,
}

impl RunOutcome {
    pub fn record(&self, protocol: Protocol, config: &TrainConfig, set: &ImageSet) -> RunRecord {
        let [train, validation, test] = set.manifest().counts();
        RunRecord {
            protocol,
            config: config.clone(),
            class_names: set.dataset().class_names().to_vec(),
            split_seed: set.manifest().seed,
            split_counts: SplitCounts { train, validation, test },
            epochs: self
                .reports
                .iter()
                .map(|r| EpochSummary {
                    epoch: r.epoch,
                    train_loss: r.train_loss,
                    train_accuracy: r.train_accuracy,
                    validation_accuracy: r.validation_accuracy,
                })
                .collect(),
            selected_epoch: self.selected_epoch,
            test_accuracy: self.test_accuracy,
            confusion: self.confusion.clone(),
            weights_sha256: hex::encode(Sha256::digest(&self.weights)),
        }
    }

    pub fn timing(&self) -> TimingRecord {
        let epoch_seconds: Vec<f64> = self.reports.iter().map(|r| r.seconds).collect();
        let total_seconds: f64 = epoch_seconds.iter().sum();
        TimingRecord { mean_epoch_seconds: total_seconds / epoch_seconds.len().max(1) as f64, epoch_seconds, total_seconds }
    }

    /// Writes the run directory: `config.toml`, `manifest.json`,
    /// `metrics.csv`, `confusion.csv`, `confusion_normalized.csv`,
    /// `run.json`, `timing.json` and `weights.bin`.
    pub fn write_run_dir(&self, dir: &Path, protocol: Protocol, config: &TrainConfig, set: &ImageSet) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join("config.toml"), &config.to_toml()?)?;
        set.manifest().save(&dir.join("manifest.json"))?;
        write_text(&dir.join("metrics.csv"), &epochs_csv(&self.reports))?;
        write_text(&dir.join("confusion.csv"), &self.confusion.to_csv())?;
        write_text(&dir.join("confusion_normalized.csv"), &self.confusion.to_normalized_csv())?;
        write_json(&dir.join("run.json"), &self.record(protocol, config, set))?;
        write_json(&dir.join("timing.json"), &self.timing())?;
        let path = dir.join("weights.bin");
        std::fs::write(&path, &self.weights).map_err(|e| Error::io(&path, e))
    }
}

/// Builds the starting model for `protocol`. Post-training loads the
/// initial weights, checks that they differ from the configured spec at
/// most in class count, and replaces the classifier.
pub fn initial_model(protocol: Protocol, config: &TrainConfig) -> Result<SenetModel<f32>> {
    match (protocol, &config.initial_weights) {
        (Protocol::Pretrain, None) => SenetModel::build(&config.model, derive_seed(config.seed, "init")),
        (Protocol::Pretrain, Some(_)) => {
            Err(Error::Config("pre-training starts from fresh weights; remove initial_weights".into()))
        }
        (Protocol::Posttrain, None) => Err(Error::Config("post-training requires initial weights".into())),
        (Protocol::Posttrain, Some(path)) => {
            let file = load_weights(path)?;
            let differences = file.spec.differences_except_classes(&config.model);
            if !differences.is_empty() {
                return Err(Error::Compatibility { differences });
            }
            SenetModel::from_parts(&file.spec, file.params)?
                .replace_classifier(config.model.num_classes, derive_seed(config.seed, "classifier"))
        }
    }
}

/// One complete run. With `out`, checkpoints and the run directory are
/// written there.
pub fn run(protocol: Protocol, config: &TrainConfig, set: &ImageSet, out: Option<&Path>) -> Result<RunOutcome> {
    config.validate()?;
    let model = initial_model(protocol, config)?;
    let mut trainer = Trainer::new(config.clone(), set, model)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        trainer = trainer.with_checkpoint_dir(dir);
    }
    trainer.train()?;
    let outcome = trainer.finish()?;
    if let Some(dir) = out {
        outcome.write_run_dir(dir, protocol, config, set)?;
    }
    Ok(outcome)
}

pub fn pretrain(config: &TrainConfig, set: &ImageSet, out: Option<&Path>) -> Result<RunOutcome> {
    run(Protocol::Pretrain, config, set, out)
}

pub fn posttrain(config: &TrainConfig, set: &ImageSet, out: Option<&Path>) -> Result<RunOutcome> {
    run(Protocol::Posttrain, config, set, out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRun {
    pub run: usize,
    pub seed: u64,
    pub selected_epoch: usize,
    pub test_accuracy: f64,
}

/// Aggregate `run.json` of a repeated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub protocol: Protocol,
    pub config: TrainConfig,
    pub class_names: Vec<String>,
    pub split_seed: u64,
    pub split_counts: SplitCounts,
    pub runs: Vec<RepeatRun>,
    pub mean_test_accuracy: f64,
}

/// `n` runs with seeds `config.seed + i` on the same split. Each run's
/// directory is `out/run_NN`.
pub fn repeat_runs(
    protocol: Protocol,
    config: &TrainConfig,
    set: &ImageSet,
    n: usize,
    out: Option<&Path>,
) -> Result<RepeatRecord> {
    if n == 0 {
        return Err(Error::Config("repeat count must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(n);
    for i in 0..n {
        let seed = config.seed.wrapping_add(i as u64);
        let cfg = TrainConfig { seed, ..config.clone() };
        let dir = out.map(|d| d.join(format!("run_{i:02}")));
        let outcome =
            run(protocol, &cfg, set, dir.as_deref()).map_err(|e| Error::Run { seed, source: Box::new(e) })?;
        runs.push(RepeatRun { run: i, seed, selected_epoch: outcome.selected_epoch, test_accuracy: outcome.test_accuracy });
    }
    let mean_test_accuracy = runs.iter().map(|r| r.test_accuracy).sum::<f64>() / n as f64;
    let [train, validation, test] = set.manifest().counts();
    let record = RepeatRecord {
        protocol,
        config: config.clone(),
        class_names: set.dataset().class_names().to_vec(),
        split_seed: set.manifest().seed,
        split_counts: SplitCounts { train, validation, test },
        runs,
        mean_test_accuracy,
    };
    if let Some(dir) = out {
        write_text(&dir.join("config.toml"), &config.to_toml()?)?;
        set.manifest().save(&dir.join("manifest.json"))?;
        write_json(&dir.join("run.json"), &record)?;
    }
    Ok(record)
}

/// Number of test-split reads recorded by `set`; used to confirm test
/// isolation from outside a run.
pub fn test_reads(set: &ImageSet) -> usize {
    set.accesses(Split::Test)
}
