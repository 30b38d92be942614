use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{CheckpointRule, TrainConfig};
use crate::data::{BatchOptions, ImageSet, Split};
use crate::error::{Error, Result};
use crate::metrics::{argmax, evaluate, ConfusionMatrix, EpochReport};
use crate::model::{decode, SenetModel};
use crate::nn::derive_seed;
use crate::optim::{loss_and_grad, Adam};

type ValidationHook<'a> = Box<dyn FnMut(usize, f64) -> f64 + 'a>;

/// Epoch-by-epoch training loop over one [`ImageSet`].
///
/// The test split is not read until [`Trainer::finish`].
pub struct Trainer<'a> {
    config: TrainConfig,
    set: &'a ImageSet,
    model: SenetModel<f32>,
    optimizer: Adam<f32>,
    dropout_rng: ChaCha8Rng,
    reports: Vec<EpochReport>,
    best: Option<(usize, f64, Vec<u8>)>,
    checkpoint_dir: Option<PathBuf>,
    validation_hook: Option<ValidationHook<'a>>,
    test_reads_at_start: usize,
}

/// Result of a finished run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub model: SenetModel<f32>,
    pub weights: Vec<u8>,
    pub reports: Vec<EpochReport>,
    /// Epoch whose weights were evaluated on the test split.
    pub selected_epoch: usize,
    pub test_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, set: &'a ImageSet, model: SenetModel<f32>) -> Result<Self> {
        config.validate()?;
        let classes = set.dataset().num_classes();
        if model.num_classes() != classes {
            return Err(Error::Config(format!(
                "model predicts {} classes, dataset has {classes}",
                model.num_classes()
            )));
        }
        let spec = model.spec();
        if set.resolution() != (spec.height, spec.width) {
            return Err(Error::Config(format!(
                "images are prepared at {:?}, model expects {}×{}",
                set.resolution(),
                spec.height,
                spec.width
            )));
        }
        let optimizer = Adam::new(config.optimizer);
        let dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "dropout"));
        Ok(Trainer {
            config,
            set,
            model,
            optimizer,
            dropout_rng,
            reports: Vec::new(),
            best: None,
            checkpoint_dir: None,
            validation_hook: None,
            test_reads_at_start: set.accesses(Split::Test),
        })
    }

    /// Writes `checkpoint.bin` into `dir` at every validation improvement.
    pub fn with_checkpoint_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.checkpoint_dir = Some(dir.into());
        self
    }

    /// Replaces the measured validation accuracy: the hook receives the
    /// epoch and measured value and returns the value to record.
    pub fn with_validation_hook(mut self, hook: impl FnMut(usize, f64) -> f64 + 'a) -> Self {
        self.validation_hook = Some(Box::new(hook));
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &SenetModel<f32> {
        &self.model
    }

    pub fn reports(&self) -> &[EpochReport] {
        &self.reports
    }

    pub fn epochs_done(&self) -> usize {
        self.reports.len()
    }

    /// Epoch and accuracy of the best validation result so far.
    pub fn best_epoch(&self) -> Option<(usize, f64)> {
        self.best.as_ref().map(|(e, a, _)| (*e, *a))
    }

    /// Inference-mode accuracy of the current weights on `split`.
    pub fn accuracy_on(&self, split: Split) -> Result<f64> {
        if split == Split::Test {
            return Err(Error::Training("the test split is reserved for the final evaluation".into()));
        }
        let opts = BatchOptions::sequential(self.config.batch_size);
        let names = self.set.dataset().class_names();
        Ok(evaluate(&self.model, names, self.set.batches(split, &opts))?.0)
    }

    /// One pass over the training split followed by validation.
    pub fn run_epoch(&mut self) -> Result<&EpochReport> {
        let epoch = self.reports.len() + 1;
        let start = Instant::now();
        let opts = BatchOptions {
            batch_size: self.config.batch_size,
            shuffle: Some(derive_seed(self.config.seed, &format!("shuffle/{epoch}"))),
            augment: self.config.augment,
            augment_seed: derive_seed(self.config.seed, &format!("augment/{epoch}")),
        };
        let c = self.model.num_classes();
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for (b, batch) in self.set.batches(Split::Train, &opts).enumerate() {
            let batch = batch?;
            let out = loss_and_grad(&mut self.model, &batch.images, &batch.labels, &mut self.dropout_rng)?;
            if !out.loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b, loss: out.loss });
            }
            self.optimizer.step(self.model.params_mut())?;
            loss_sum += out.loss * batch.len() as f64;
            seen += batch.len();
            correct += out
                .probs
                .data()
                .chunks(c)
                .zip(&batch.labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
        }
        let measured = self.accuracy_on(Split::Validation)?;
        let validation_accuracy = match &mut self.validation_hook {
            Some(hook) => hook(epoch, measured),
            None => measured,
        };
        if self.best.as_ref().is_none_or(|(_, a, _)| validation_accuracy > *a) {
            let bytes = self.model.to_bytes();
            if let Some(dir) = &self.checkpoint_dir {
                let path = dir.join("checkpoint.bin");
                std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            }
            self.best = Some((epoch, validation_accuracy, bytes));
        }
        self.reports.push(EpochReport {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            train_accuracy: correct as f64 / seen.max(1) as f64,
            validation_accuracy,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(self.reports.last().expect("just pushed"))
    }

    /// Runs the remaining configured epochs.
    pub fn train(&mut self) -> Result<()> {
        while self.reports.len() < self.config.epochs {
            let epochs = self.config.epochs;
            let r = self.run_epoch()?;
            log::info!(
                "epoch {}/{epochs}: loss {:.4}, train acc {:.4}, val acc {:.4} ({:.2}s)",
                r.epoch,
                r.train_loss,
                r.train_accuracy,
                r.validation_accuracy,
                r.seconds
            );
        }
        Ok(())
    }

    /// Selects weights by the checkpoint rule and evaluates them on the test
    /// split.
    pub fn finish(self) -> Result<RunOutcome> {
        if self.reports.is_empty() {
            return Err(Error::Training("no epoch has been run".into()));
        }
        if self.set.accesses(Split::Test) != self.test_reads_at_start {
            return Err(Error::Training("test samples were read before the final evaluation".into()));
        }
        let final_epoch = self.reports.len();
        let (model, selected_epoch) = match self.config.checkpoint_rule {
            CheckpointRule::FinalEpoch => (self.model, final_epoch),
            CheckpointRule::BestValidation => {
                let (epoch, _, bytes) = self.best.expect("at least one epoch recorded");
                let file = decode(&bytes)?;
                (SenetModel::from_parts(&file.spec, file.params)?, epoch)
            }
        };
        let opts = BatchOptions::sequential(self.config.batch_size);
        let names = self.set.dataset().class_names();
        let (test_accuracy, confusion) = evaluate(&model, names, self.set.batches(Split::Test, &opts))?;
        Ok(RunOutcome {
            weights: model.to_bytes(),
            model,
            reports: self.reports,
            selected_epoch,
            test_accuracy,
            confusion,
        })
    }
}
