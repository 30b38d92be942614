//! Training runs: pre-training, post-training with classifier surgery, and
//! repeated runs.

mod config;
mod protocol;
mod trainer;

pub use config::{CheckpointRule, TrainConfig};
pub use protocol::{
    initial_model, posttrain, pretrain, repeat_runs, run, test_reads, EpochSummary, Protocol, RepeatRecord, RepeatRun,
    RunRecord, SplitCounts, TimingRecord,
};
pub use trainer::{RunOutcome, Trainer};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, Fractions, ImageSet, Split, SyntheticConfig};
    use crate::model::ModelSpec;

    fn tiny_set() -> ImageSet {
        let cfg = SyntheticConfig { classes: 3, per_class: 10, height: 16, width: 16, ..Default::default() };
        let ds = cfg.generate().unwrap();
        let m = split(&ds, 1, Fractions::default()).unwrap();
        ImageSet::new(ds, m, 16, 16).unwrap()
    }

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            height: 16,
            width: 16,
            stages: vec![crate::model::StageSpec::new(4, 3)],
            reduction_ratio: 2,
            fc_units: 8,
            num_classes: 3,
            ..Default::default()
        }
    }

    #[test]
    fn epochs_are_contiguous_and_test_is_untouched_until_finish() {
        let set = tiny_set();
        let cfg = TrainConfig { epochs: 3, batch_size: 4, ..TrainConfig::pretrain(tiny_spec()) };
        let mut t = Trainer::new(cfg.clone(), &set, initial_model(Protocol::Pretrain, &cfg).unwrap()).unwrap();
        t.train().unwrap();
        assert_eq!(t.reports().iter().map(|r| r.epoch).collect::<Vec<_>>(), [1, 2, 3]);
        assert_eq!(set.accesses(Split::Test), 0);
        assert!(t.accuracy_on(Split::Test).is_err());
        let out = t.finish().unwrap();
        assert_eq!(set.accesses(Split::Test), set.manifest().counts()[2]);
        assert_eq!(out.confusion.total() as usize, set.manifest().counts()[2]);
    }

    #[test]
    fn posttrain_requires_weights_and_pretrain_refuses_them() {
        let set = tiny_set();
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::pretrain(tiny_spec()) };
        let post = TrainConfig { initial_weights: None, ..TrainConfig::posttrain(tiny_spec(), "x") };
        assert!(matches!(posttrain(&post, &set, None), Err(crate::Error::Config(_))));
        let pre = TrainConfig { initial_weights: Some("x".into()), ..cfg };
        assert!(matches!(pretrain(&pre, &set, None), Err(crate::Error::Config(_))));
    }

    #[test]
    fn repeat_mean_matches_runs() {
        let set = tiny_set();
        let cfg = TrainConfig { epochs: 1, batch_size: 8, seed: 3, ..TrainConfig::pretrain(tiny_spec()) };
        let rec = repeat_runs(Protocol::Pretrain, &cfg, &set, 3, None).unwrap();
        assert_eq!(rec.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), [3, 4, 5]);
        let mean = rec.runs.iter().map(|r| r.test_accuracy).sum::<f64>() / 3.0;
        assert!((mean - rec.mean_test_accuracy).abs() < 1e-9);
    }
}
