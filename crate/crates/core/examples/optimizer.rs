//! Adam on a least-squares problem, driven through a parameter store the
//! same way the trainer drives the network.
//!
//!     cargo run --example optimizer

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use senet::nn::{ParamRole, ParameterStore};
use senet::optim::{Adam, AdamConfig};
use senet::{Tape, Tensor};

fn main() -> senet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = [2.0f32, -1.0, 0.5];
    let xs: Vec<f32> = (0..64 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f32> = xs.chunks(3).map(|r| r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f32>() + 0.3).collect();
    let x = Tensor::new(vec![64, 3], xs)?;

    let mut store = ParameterStore::<f32>::new();
    store.insert("w", Tensor::zeros(vec![3, 1])?, ParamRole::Weight)?;
    store.insert("b", Tensor::zeros(vec![1])?, ParamRole::Bias)?;
    let mut adam = Adam::new(AdamConfig { lr: 0.05, ..AdamConfig::default() });

    for step in 0..=300 {
        let mut tape = Tape::new();
        let input = tape.constant(x.clone());
        let w = tape.variable(store.tensor("w")?.clone());
        let b = tape.variable(store.tensor("b")?.clone());
        let pred = tape.matmul(input, w)?;
        let pred = tape.add_bias(pred, b)?;
        // Σ(p − y)² expanded as Σp² − 2Σpy + const.
        let sq = tape.mul(pred, pred)?;
        let sq = tape.sum(sq);
        let cross = tape.weighted_sum(pred, &ys.iter().map(|y| -2.0 * y).collect::<Vec<_>>())?;
        let loss = tape.add(sq, cross)?;
        tape.backward(loss)?;
        let (gw, gb) = (tape.grad(w).unwrap().to_vec(), tape.grad(b).unwrap().to_vec());
        store.tensor_mut("w")?.set_grad(gw)?;
        store.tensor_mut("b")?.set_grad(gb)?;
        adam.step(&mut store)?;
        if step % 100 == 0 {
            println!("step {step:3}: w {:?} b {:?}", store.tensor("w")?.data(), store.tensor("b")?.data());
        }
    }
    println!("target: w {truth:?} b [0.3]");
    Ok(())
}
