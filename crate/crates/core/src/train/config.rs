use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::AugmentConfig;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::optim::AdamConfig;

/// Which weights are evaluated on the test split once training ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointRule {
    /// Highest validation accuracy; ties keep the earlier epoch.
    BestValidation,
    FinalEpoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_rule: CheckpointRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: AdamConfig,
    /// Applied to training batches only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentConfig>,
    pub model: ModelSpec,
}

impl TrainConfig {
    /// 50 epochs at batch size 16, evaluated at the best validation epoch.
    pub fn pretrain(model: ModelSpec) -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            seed: 0,
            checkpoint_rule: CheckpointRule::BestValidation,
            initial_weights: None,
            optimizer: AdamConfig::default(),
            augment: None,
            model,
        }
    }

    /// 50 epochs at batch size 8 from `weights`, evaluated at the final epoch.
    pub fn posttrain(model: ModelSpec, weights: impl Into<PathBuf>) -> Self {
        TrainConfig {
            batch_size: 8,
            checkpoint_rule: CheckpointRule::FinalEpoch,
            initial_weights: Some(weights.into()),
            ..TrainConfig::pretrain(model)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let o = &self.optimizer;
        if !(o.lr >= 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.epsilon > 0.0) {
            return Err(Error::Config(format!("optimizer settings out of range: {o:?}")));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        self.model.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot encode config: {e}")))
    }
}
