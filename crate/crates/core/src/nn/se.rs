//! Squeeze-and-excitation channel recalibration.
//!
//! `z = mean_hw(x)`, `s = σ(FC₂(act(FC₁(z))))`, `y = x ⊙ s` with `s`
//! broadcast over every spatial position. FC₁ maps `C → ⌈C/r⌉` and FC₂ maps
//! back to `C`.

use super::layer::Activation;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Var};

/// Bottleneck width; rounds up so that at least one unit survives when `C < r`.
pub fn se_hidden_width(channels: usize, reduction: usize) -> usize {
    channels.div_ceil(reduction)
}

#[derive(Clone, Copy, Debug)]
pub struct SeWeights {
    pub fc1_weight: Var,
    pub fc1_bias: Var,
    pub fc2_weight: Var,
    pub fc2_bias: Var,
}

/// Gate values `s[B×C]` for `x[B×H×W×C]`.
pub fn se_gate<T: Real>(tape: &mut Tape<T>, x: Var, w: &SeWeights, inner: Activation) -> Result<Var> {
    let c = match *tape.shape(x).dims() {
        [_, _, _, c] => c,
        _ => return Err(Error::dim("se_block", format!("expected B×H×W×C input, got {}", tape.shape(x)))),
    };
    let fc1 = tape.shape(w.fc1_weight).dims().to_vec();
    let fc2 = tape.shape(w.fc2_weight).dims().to_vec();
    let consistent = matches!((&fc1[..], &fc2[..]), ([c1, h1], [h2, c2]) if *c1 == c && *c2 == c && h1 == h2);
    if !consistent {
        return Err(Error::dim(
            "se_block",
            format!("excitation weights {fc1:?} and {fc2:?} do not fit {c} channels"),
        ));
    }
    let z = tape.global_avg_pool(x)?;
    let h = tape.matmul(z, w.fc1_weight)?;
    let h = tape.add_bias(h, w.fc1_bias)?;
    let h = inner.apply(tape, h);
    let s = tape.matmul(h, w.fc2_weight)?;
    let s = tape.add_bias(s, w.fc2_bias)?;
    Ok(tape.sigmoid(s))
}

/// Squeeze, excite, and rescale. The output has the input's shape.
pub fn se_block_forward<T: Real>(tape: &mut Tape<T>, x: Var, w: &SeWeights, inner: Activation) -> Result<Var> {
    let s = se_gate(tape, x, w, inner)?;
    tape.scale_channels(x, s)
}
