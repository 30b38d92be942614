use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::layer_rng;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Train/validation/test proportions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Fractions { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl Fractions {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.as_array();
        if f.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Split(format!("fractions {f:?} must all be positive")));
        }
        let total: f64 = f.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Per-class split sizes by largest remainder. Leftover samples go to the
/// largest fractional quotas; ties favour validation, then test, then train.
/// Every split receives at least one sample.
pub fn allocate(n: usize, fractions: &Fractions) -> [usize; 3] {
    let f = fractions.as_array();
    let quota: Vec<f64> = f.iter().map(|v| v * n as f64).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = quota[i].floor() as usize;
    }
    let mut order = [1usize, 2, 0];
    order.sort_by(|&a, &b| {
        let ra = quota[a] - quota[a].floor();
        let rb = quota[b] - quota[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    for i in 0..3 {
        if counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).expect("three splits");
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub key: String,
    pub label: usize,
    pub split: Split,
}

/// Deterministic record of which sample belongs to which split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub version: u32,
    pub seed: u64,
    pub fractions: Fractions,
    pub class_names: Vec<String>,
    /// One entry per dataset sample, in dataset order.
    pub assignments: Vec<Assignment>,
}

/// Stratified split: each class is shuffled under its own seeded stream and
/// cut according to [`allocate`].
pub fn split(dataset: &Dataset, seed: u64, fractions: Fractions) -> Result<SplitManifest> {
    fractions.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, s) in dataset.samples().iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut assigned = vec![Split::Train; dataset.len()];
    for (label, members) in by_class.iter_mut().enumerate() {
        let name = &dataset.class_names()[label];
        if members.len() < 3 {
            return Err(Error::Split(format!(
                "class {name} has {} samples; at least 3 are needed to fill train, validation and test",
                members.len()
            )));
        }
        let mut rng = layer_rng(seed, &format!("split/{name}"));
        members.shuffle(&mut rng);
        let [train, val, _] = allocate(members.len(), &fractions);
        for (pos, &i) in members.iter().enumerate() {
            assigned[i] = if pos < train {
                Split::Train
            } else if pos < train + val {
                Split::Validation
            } else {
                Split::Test
            };
        }
    }
    let assignments = dataset
        .samples()
        .iter()
        .zip(assigned)
        .map(|(s, split)| Assignment { key: s.key.clone(), label: s.label, split })
        .collect();
    Ok(SplitManifest {
        version: MANIFEST_VERSION,
        seed,
        fractions,
        class_names: dataset.class_names().to_vec(),
        assignments,
    })
}

impl SplitManifest {
    /// Dataset indices of one split, in dataset order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| a.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for a in &self.assignments {
            c[a.split.index()] += 1;
        }
        c
    }

    /// `[class][split]` sample counts.
    pub fn class_counts(&self) -> Vec<[usize; 3]> {
        let mut c = vec![[0; 3]; self.class_names.len()];
        for a in &self.assignments {
            c[a.label][a.split.index()] += 1;
        }
        c
    }

    /// Checks that the manifest describes exactly this dataset.
    pub fn check_matches(&self, dataset: &Dataset) -> Result<()> {
        if self.class_names != dataset.class_names() {
            return Err(Error::Split(format!(
                "manifest classes {:?} differ from dataset classes {:?}",
                self.class_names,
                dataset.class_names()
            )));
        }
        if self.assignments.len() != dataset.len() {
            return Err(Error::Split(format!(
                "manifest lists {} samples, dataset has {}",
                self.assignments.len(),
                dataset.len()
            )));
        }
        for (a, s) in self.assignments.iter().zip(dataset.samples()) {
            if a.key != s.key || a.label != s.label {
                return Err(Error::Split(format!("manifest entry {} does not match sample {}", a.key, s.key)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: SplitManifest = serde_json::from_str(text).map_err(|e| Error::Split(format!("manifest: {e}")))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Split(format!("unsupported manifest version {}", m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
