//! Finite-difference verification of every differentiable primitive.
//!
//! Each check builds a small graph on random 64-bit inputs, reduces the
//! output to a scalar with fixed random weights, and compares reverse-mode
//! gradients against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::nn::{se_block_forward, Activation, SeWeights};
use crate::optim::one_hot;
use crate::tensor::{BatchNormMode, Tape, Tensor, Var};

pub const STEP: f64 = 1e-6;
/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`.
pub const FLOOR: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-4;

type Build = fn(&mut Tape<f64>, &[Var]) -> Result<Var>;

/// A named graph over random inputs of the given shapes.
pub struct Check {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    build: Build,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub elements: usize,
    pub max_rel_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

fn se(t: &mut Tape<f64>, v: &[Var]) -> Result<Var> {
    let w = SeWeights { fc1_weight: v[1], fc1_bias: v[2], fc2_weight: v[3], fc2_bias: v[4] };
    se_block_forward(t, v[0], &w, Activation::Relu)
}

fn softmax_ce(t: &mut Tape<f64>, v: &[Var]) -> Result<Var> {
    let targets = one_hot::<f64>(&[2, 0, 4], 5)?;
    t.softmax_cross_entropy(v[0], &targets)
}

fn softmax_then_ce(t: &mut Tape<f64>, v: &[Var]) -> Result<Var> {
    let targets = one_hot::<f64>(&[1, 3, 3, 0], 4)?;
    let p = t.softmax(v[0])?;
    t.cross_entropy(p, &targets)
}

/// The full primitive suite. Every input has at most 200 elements.
pub fn suite() -> Vec<Check> {
    fn c(name: &'static str, shapes: &[&[usize]], build: Build) -> Check {
        Check { name, shapes: shapes.iter().map(|s| s.to_vec()).collect(), build }
    }
    vec![
        c("matmul", &[&[4, 6], &[6, 5]], |t, v| t.matmul(v[0], v[1])),
        c("add", &[&[3, 7], &[3, 7]], |t, v| t.add(v[0], v[1])),
        c("multiply", &[&[3, 7], &[3, 7]], |t, v| t.mul(v[0], v[1])),
        c("scale_channels", &[&[2, 3, 3, 4], &[2, 4]], |t, v| t.scale_channels(v[0], v[1])),
        c("conv2d", &[&[2, 6, 5, 3], &[3, 3, 3, 4]], |t, v| t.conv2d(v[0], v[1])),
        c("maxpool2d", &[&[2, 5, 6, 3]], |t, v| t.maxpool2d(v[0])),
        c("global_avg_pool", &[&[2, 4, 5, 3]], |t, v| t.global_avg_pool(v[0])),
        c("relu", &[&[5, 9]], |t, v| Ok(t.relu(v[0]))),
        c("sigmoid", &[&[5, 9]], |t, v| Ok(t.sigmoid(v[0]))),
        c("batchnorm", &[&[6, 5], &[5], &[5]], |t, v| {
            Ok(t.batch_norm(v[0], v[1], v[2], BatchNormMode::Training { eps: 1e-5 })?.0)
        }),
        c("batchnorm_spatial", &[&[2, 3, 3, 4], &[4], &[4]], |t, v| {
            Ok(t.batch_norm(v[0], v[1], v[2], BatchNormMode::Training { eps: 1e-5 })?.0)
        }),
        c("dense", &[&[4, 8], &[8, 6], &[6]], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            t.add_bias(y, v[2])
        }),
        c("softmax", &[&[3, 6]], |t, v| t.softmax(v[0])),
        c("softmax_cross_entropy", &[&[3, 5]], softmax_ce),
        c("softmax_then_cross_entropy", &[&[4, 4]], softmax_then_ce),
        c("flatten", &[&[2, 3, 2, 4]], |t, v| t.flatten(v[0])),
        c("se_block", &[&[2, 3, 3, 8], &[8, 2], &[2], &[2, 8], &[8]], se),
    ]
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("valid shape")
}

impl Check {
    fn loss(&self, inputs: &[Tensor<f64>], probe: &[f64], grads: bool) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.variable(x.clone())).collect();
        let y = (self.build)(&mut tape, &vars)?;
        let loss = tape.weighted_sum(y, &probe[..tape.value(y).len()])?;
        let value = tape.value(loss).data()[0];
        if !grads {
            return Ok((value, vec![]));
        }
        tape.backward(loss)?;
        let g = vars
            .iter()
            .zip(inputs)
            .map(|(&v, x)| tape.grad(v).map_or_else(|| vec![0.0; x.len()], <[f64]>::to_vec))
            .collect();
        Ok((value, g))
    }

    pub fn run(&self, seed: u64) -> Result<CheckResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs: Vec<Tensor<f64>> = self.shapes.iter().map(|s| random(s, &mut rng)).collect();
        let probe: Vec<f64> = (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, analytic) = self.loss(&inputs, &probe, true)?;
        let mut max_rel_error = 0.0f64;
        let mut elements = 0;
        for k in 0..inputs.len() {
            for i in 0..inputs[k].len() {
                let orig = inputs[k].data()[i];
                inputs[k].data_mut()[i] = orig + STEP;
                let (plus, _) = self.loss(&inputs, &probe, false)?;
                inputs[k].data_mut()[i] = orig - STEP;
                let (minus, _) = self.loss(&inputs, &probe, false)?;
                inputs[k].data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * STEP);
                let a = analytic[k][i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
                max_rel_error = max_rel_error.max(rel);
                elements += 1;
            }
        }
        Ok(CheckResult { name: self.name, elements, max_rel_error })
    }
}

/// Runs every check in [`suite`].
pub fn run_suite(seed: u64) -> Result<Vec<CheckResult>> {
    suite().iter().map(|c| c.run(seed)).collect()
}
