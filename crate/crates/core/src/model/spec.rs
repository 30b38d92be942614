use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Activation, BatchNormConfig};

/// One convolutional stage: conv → batchnorm → SE → ReLU → 2×2 max pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub filters: usize,
    pub kernel_size: usize,
}

impl StageSpec {
    pub const fn new(filters: usize, kernel_size: usize) -> Self {
        StageSpec { filters, kernel_size }
    }
}

/// Full architecture description. Two specs with the same fingerprint build
/// structurally identical models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub stages: Vec<StageSpec>,
    pub reduction_ratio: usize,
    pub fc_units: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub batch_norm: bool,
    /// Disabling this bypasses every SE block, leaving the shape chain intact.
    pub se_blocks: bool,
    /// Nonlinearity after the second dense/batchnorm pair of the head.
    pub head_activation: Activation,
    /// Nonlinearity between the two excitation FC layers.
    pub se_inner_activation: Activation,
    pub batch_norm_config: BatchNormConfig,
}

pub const FULL_STAGES: [StageSpec; 5] = [
    StageSpec::new(32, 5),
    StageSpec::new(64, 3),
    StageSpec::new(64, 3),
    StageSpec::new(128, 2),
    StageSpec::new(256, 2),
];

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            height: 200,
            width: 200,
            channels: 3,
            stages: FULL_STAGES.to_vec(),
            reduction_ratio: 16,
            fc_units: 256,
            dropout_rate: 0.5,
            num_classes: 23,
            batch_norm: true,
            se_blocks: true,
            head_activation: Activation::Relu,
            se_inner_activation: Activation::Relu,
            batch_norm_config: BatchNormConfig::default(),
        }
    }
}

/// Per-stage spatial extents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageShape {
    /// `[H, W, F]` after the convolution.
    pub conv: [usize; 3],
    /// `[H, W, F]` after pooling.
    pub pooled: [usize; 3],
}

impl ModelSpec {
    /// The 200×200×3 five-stage network with `num_classes` outputs.
    pub fn full(num_classes: usize) -> Self {
        ModelSpec { num_classes, ..Default::default() }
    }

    /// A 32×32 three-stage network small enough to train on a laptop CPU
    /// in seconds.
    pub fn desk_scale(num_classes: usize) -> Self {
        ModelSpec {
            height: 32,
            width: 32,
            stages: vec![StageSpec::new(8, 3), StageSpec::new(16, 3), StageSpec::new(16, 2)],
            reduction_ratio: 4,
            fc_units: 32,
            num_classes,
            ..Default::default()
        }
    }

    /// Shapes through every stage; fails naming the first stage whose
    /// extent would become non-positive.
    pub fn shape_chain(&self) -> Result<Vec<StageShape>> {
        let (mut h, mut w) = (self.height, self.width);
        if h == 0 || w == 0 || self.channels == 0 {
            return Err(Error::Spec(format!("input {h}×{w}×{} must be positive", self.channels)));
        }
        let mut out = Vec::with_capacity(self.stages.len());
        for (i, st) in self.stages.iter().enumerate() {
            let stage = i + 1;
            if st.filters == 0 || st.kernel_size == 0 {
                return Err(Error::Spec(format!("stage {stage}: filters and kernel size must be positive")));
            }
            if h < st.kernel_size || w < st.kernel_size {
                return Err(Error::Spec(format!(
                    "stage {stage}: {0}×{0} kernel does not fit {h}×{w} input",
                    st.kernel_size
                )));
            }
            let conv = [h - st.kernel_size + 1, w - st.kernel_size + 1, st.filters];
            if conv[0] < 2 || conv[1] < 2 {
                return Err(Error::Spec(format!(
                    "stage {stage}: {}×{} conv output pools to zero extent",
                    conv[0], conv[1]
                )));
            }
            let pooled = [conv[0] / 2, conv[1] / 2, st.filters];
            (h, w) = (pooled[0], pooled[1]);
            out.push(StageShape { conv, pooled });
        }
        Ok(out)
    }

    pub fn flatten_width(&self) -> Result<usize> {
        let chain = self.shape_chain()?;
        Ok(match chain.last() {
            Some(s) => s.pooled.iter().product(),
            None => self.height * self.width * self.channels,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.shape_chain()?;
        if self.num_classes < 2 {
            return Err(Error::Spec(format!("num_classes must be at least 2, got {}", self.num_classes)));
        }
        if self.fc_units == 0 {
            return Err(Error::Spec("fc_units must be positive".into()));
        }
        if self.reduction_ratio == 0 {
            return Err(Error::Spec("reduction_ratio must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Spec(format!("dropout_rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    /// Canonical JSON encoding; the fingerprint is computed over these bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(hex::encode(Sha256::digest(self.canonical_json().as_bytes())))
    }

    /// Field-by-field differences, rendered `field: self vs other`.
    pub fn differences(&self, other: &ModelSpec) -> Vec<String> {
        let a = serde_json::to_value(self).expect("spec serializes");
        let b = serde_json::to_value(other).expect("spec serializes");
        let (Some(a), Some(b)) = (a.as_object(), b.as_object()) else {
            return vec![];
        };
        a.iter()
            .filter(|(k, v)| b.get(*k) != Some(v))
            .map(|(k, v)| format!("{k}: {v} vs {}", b.get(k).cloned().unwrap_or_default()))
            .collect()
    }

    /// Differences other than the classifier width.
    pub fn differences_except_classes(&self, other: &ModelSpec) -> Vec<String> {
        let aligned = ModelSpec { num_classes: other.num_classes, ..self.clone() };
        aligned.differences(other)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint(pub String);

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}
