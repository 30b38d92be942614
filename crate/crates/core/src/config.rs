//! Run configuration files (TOML).
//!
//! ```toml
//! [data]
//! root = "fish"          # class-per-directory image tree
//! split_seed = 0
//! fractions = { train = 0.7, validation = 0.15, test = 0.15 }
//!
//! [model]                # any ModelSpec field; omitted fields keep defaults
//! height = 200
//!
//! [train]
//! epochs = 50
//! seed = 1
//!
//! [augment]              # present = enabled
//! rotation_range = 15.0
//!
//! [output]
//! dir = "runs/pretrain"
//! ```
//!
//! Unknown keys are rejected. Command-line flags override file values, and
//! the merged result is what a run directory records.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, Fractions};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::optim::AdamConfig;
use crate::train::{CheckpointRule, Protocol, TrainConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SENET_OUT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    /// Existing split manifest to reuse instead of splitting anew.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub split_seed: u64,
    pub fractions: Fractions,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_rule: Option<CheckpointRule>,
    /// Initial weights for post-training.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeat: Option<usize>,
    pub optimizer: AdamConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub data: DataSection,
    pub train: TrainSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentConfig>,
    pub output: OutputSection,
    /// For post-training, omitted means "the loaded weights' spec".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ").trim().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot encode config: {e}")))
    }

    /// Run directory: the file's value, else `run_name` under
    /// `$SENET_OUT_DIR` (or `runs`).
    pub fn output_dir(&self, run_name: &str) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"))
                .join(run_name)
        })
    }

    /// Fills protocol defaults into every optional training field.
    pub fn resolve(&mut self, protocol: Protocol, model: ModelSpec) {
        let defaults = match protocol {
            Protocol::Pretrain => TrainConfig::pretrain(model.clone()),
            Protocol::Posttrain => TrainConfig::posttrain(model.clone(), PathBuf::new()),
        };
        let t = &mut self.train;
        t.epochs.get_or_insert(defaults.epochs);
        t.batch_size.get_or_insert(defaults.batch_size);
        t.checkpoint_rule.get_or_insert(defaults.checkpoint_rule);
        t.repeat.get_or_insert(1);
        self.model = Some(model);
    }

    /// The training config of a resolved file.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let missing = || Error::Config("config is not resolved".into());
        Ok(TrainConfig {
            epochs: t.epochs.ok_or_else(missing)?,
            batch_size: t.batch_size.ok_or_else(missing)?,
            seed: t.seed,
            checkpoint_rule: t.checkpoint_rule.ok_or_else(missing)?,
            initial_weights: t.weights.clone(),
            optimizer: t.optimizer,
            augment: self.augment,
            model: self.model.clone().ok_or_else(missing)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let c = RunConfigFile::parse("").unwrap();
        assert_eq!(c, RunConfigFile::default());
        assert_eq!(c.data.fractions, Fractions::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfigFile::parse("[train]\nepoch = 3\n").unwrap_err().to_string();
        assert!(err.contains("epoch"), "{err}");
        assert!(RunConfigFile::parse("[modle]\n").is_err());
        assert!(RunConfigFile::parse("[model]\nstages = [{ filters = 3, kernel_size = 3, pad = 1 }]\n").is_err());
    }

    #[test]
    fn sections_parse_and_resolve() {
        let text = r#"
[data]
split_seed = 4
fractions = { train = 0.8, validation = 0.1, test = 0.1 }

[model]
height = 32
width = 32
stages = [{ filters = 8, kernel_size = 3 }]
head_activation = "sigmoid"

[train]
epochs = 7
optimizer = { lr = 0.01 }

[augment]
rotation_range = 5.0
"#;
        let mut c = RunConfigFile::parse(text).unwrap();
        assert_eq!(c.augment.unwrap().rotation_range, 5.0);
        assert_eq!(c.augment.unwrap().horizontal_flip_prob, 0.5);
        let spec = c.model.clone().unwrap();
        assert_eq!(spec.stages.len(), 1);
        c.resolve(Protocol::Posttrain, spec);
        let t = c.train_config().unwrap();
        assert_eq!((t.epochs, t.batch_size, t.checkpoint_rule), (7, 8, CheckpointRule::FinalEpoch));
        assert_eq!(t.optimizer.lr, 0.01);
        assert_eq!(t.optimizer.beta2, 0.999);
        let again = RunConfigFile::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }
}
