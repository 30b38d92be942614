//! Squeeze-and-excitation on a feature map: the per-channel gates and the
//! rescaled output.
//!
//!     cargo run --example se_block

use senet::nn::{se_block_forward, se_gate, se_hidden_width, Activation, SeWeights};
use senet::{Tape, Tensor};

fn main() -> senet::Result<()> {
    let (h, w, c, r) = (4, 4, 8, 4);
    let hidden = se_hidden_width(c, r);
    let mut tape = Tape::<f32>::new();

    // Channel k carries a constant k/c, so the squeeze step sees distinct means.
    let data = (0..h * w * c).map(|i| (i % c) as f32 / c as f32).collect();
    let x = tape.constant(Tensor::new(vec![1, h, w, c], data)?);
    let ramp = |n: usize, m: usize, s: f32| {
        Tensor::new(vec![n, m], (0..n * m).map(|i| s * ((i % 5) as f32 - 2.0)).collect())
    };
    let weights = SeWeights {
        fc1_weight: tape.constant(ramp(c, hidden, 0.5)?),
        fc1_bias: tape.constant(Tensor::zeros(vec![hidden])?),
        fc2_weight: tape.constant(ramp(hidden, c, 0.8)?),
        fc2_bias: tape.constant(Tensor::zeros(vec![c])?),
    };

    let gates = se_gate(&mut tape, x, &weights, Activation::Relu)?;
    let y = se_block_forward(&mut tape, x, &weights, Activation::Relu)?;
    println!("{c} channels, reduction {r}, bottleneck {hidden}");
    println!("gates   {:?}", tape.value(gates).data());
    println!("input   {:?}", &tape.value(x).data()[..c]);
    println!("output  {:?}", &tape.value(y).data()[..c]);
    Ok(())
}
