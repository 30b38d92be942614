//! Reverse-mode differentiation on the tape: a tiny two-layer network,
//! its loss, and the gradients of every input.
//!
//!     cargo run --example autodiff

use senet::optim::one_hot;
use senet::{Tape, Tensor};

fn main() -> senet::Result<()> {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::from_rows(&[&[0.5, -1.0, 2.0], &[1.5, 0.0, -0.5]]));
    let w1 = tape.variable(Tensor::from_rows(&[&[0.1, 0.2], &[-0.3, 0.4], &[0.5, -0.6]]));
    let w2 = tape.variable(Tensor::from_rows(&[&[1.0, -1.0, 0.5], &[0.2, 0.3, -0.7]]));

    let h = tape.matmul(x, w1)?;
    let h = tape.relu(h);
    let logits = tape.matmul(h, w2)?;
    let loss = tape.softmax_cross_entropy(logits, &one_hot(&[2, 0], 3)?)?;
    tape.backward(loss)?;

    println!("loss    {:.6}", tape.value(loss).data()[0]);
    println!("dL/dw1  {:?}", tape.grad(w1).unwrap());
    println!("dL/dw2  {:?}", tape.grad(w2).unwrap());
    println!("x is a constant, so it has no gradient: {:?}", tape.grad(x));
    println!("{} nodes recorded", tape.len());
    Ok(())
}
