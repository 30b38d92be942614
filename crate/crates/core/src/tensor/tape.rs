use rand::Rng;

use super::kernels::{self, ConvDims};
use super::{Real, Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add(Var, Var),
    Mul(Var, Var),
    AddBias { x: Var, bias: Var },
    ScaleChannels { x: Var, scale: Var },
    Conv2d { x: Var, kernel: Var, dims: ConvDims },
    MaxPool { x: Var, argmax: Vec<usize> },
    GlobalAvgPool { x: Var, spatial: usize },
    Relu(Var),
    Sigmoid(Var),
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, inv_std: Vec<T>, training: bool },
    Dropout { x: Var, mask: Vec<T> },
    Softmax(Var),
    CrossEntropy { probs: Var, targets: Vec<T> },
    SoftmaxCrossEntropy { logits: Var, probs: Vec<T>, targets: Vec<T> },
    Reshape(Var),
    Sum(Var),
    WeightedSum { x: Var, weights: Vec<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// How [`Tape::batch_norm`] obtains its normalization statistics.
#[derive(Clone, Copy, Debug)]
pub enum BatchNormMode<'a, T> {
    /// Normalize with the statistics of the current batch.
    Training { eps: T },
    /// Normalize with externally tracked running statistics.
    Inference { mean: &'a [T], var: &'a [T], eps: T },
}

/// Per-feature batch statistics (biased variance) from a training-mode batchnorm.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// Ordered record of executed primitives. Nodes are appended as operations
/// run, so every node's inputs precede it and a reverse sweep is a valid
/// topological traversal.
#[derive(Debug, Default)]
pub struct Tape<T: Real = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf, keeping the tensor's own `requires_grad` flag.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        let needs_grad = tensor.requires_grad();
        self.push(tensor, Op::Leaf, needs_grad)
    }

    /// Records a trainable leaf.
    pub fn variable(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &Shape {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<T>> {
        self.nodes[v.0].value.take_grad()
    }

    fn push(&mut self, mut value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        value.clear_grad();
        let value = value.with_requires_grad(needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    fn rank4(&self, op: &'static str, v: Var) -> Result<[usize; 4]> {
        match *self.dims(v) {
            [b, h, w, c] => Ok([b, h, w, c]),
            _ => Err(Error::dim(op, format!("expected B×H×W×C input, got {}", self.shape(v)))),
        }
    }

    fn rank2(&self, op: &'static str, v: Var) -> Result<[usize; 2]> {
        match *self.dims(v) {
            [r, c] => Ok([r, c]),
            _ => Err(Error::dim(op, format!("expected a 2-D tensor, got {}", self.shape(v)))),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(op, format!("{} vs {}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn unary(&mut self, x: Var, value: Tensor<T>, op: Op<T>) -> Var {
        let needs = self.needs(x);
        self.push(value, op, needs)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let [m, k] = self.rank2("matmul", a)?;
        let [k2, n] = self.rank2("matmul", b)?;
        if k != k2 {
            return Err(Error::dim(
                "matmul",
                format!("inner extents differ: {} · {}", self.shape(a), self.shape(b)),
            ));
        }
        let out = kernels::matmul(self.data(a), self.data(b), m, k, n);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul { a, b, m, k, n }, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out: Vec<T> = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(self.dims(a).to_vec(), out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out: Vec<T> = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x * y).collect();
        let value = Tensor::new(self.dims(a).to_vec(), out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    /// Adds a 1-D bias along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let c = *self.dims(x).last().unwrap_or(&0);
        if self.dims(bias) != [c] {
            return Err(Error::dim(
                "add_bias",
                format!("bias {} does not match last axis of {}", self.shape(bias), self.shape(x)),
            ));
        }
        let b = self.data(bias);
        let out: Vec<T> = self
            .data(x)
            .chunks(c)
            .flat_map(|row| row.iter().zip(b).map(|(&v, &bv)| v + bv))
            .collect();
        let value = Tensor::new(self.dims(x).to_vec(), out)?;
        let needs = self.needs(x) || self.needs(bias);
        Ok(self.push(value, Op::AddBias { x, bias }, needs))
    }

    /// Multiplies `x[B×H×W×C]` by `scale[B×C]`, broadcast over the spatial axes.
    pub fn scale_channels(&mut self, x: Var, scale: Var) -> Result<Var> {
        let [b, h, w, c] = self.rank4("scale_channels", x)?;
        if self.dims(scale) != [b, c] {
            return Err(Error::dim(
                "scale_channels",
                format!("scale {} does not match {} (expected {b}×{c})", self.shape(scale), self.shape(x)),
            ));
        }
        let s = self.data(scale);
        let mut out = self.data(x).to_vec();
        for (i, row) in out.chunks_mut(c).enumerate() {
            let srow = &s[(i / (h * w)) * c..][..c];
            for (v, &sv) in row.iter_mut().zip(srow) {
                *v *= sv;
            }
        }
        let value = Tensor::new(vec![b, h, w, c], out)?;
        let needs = self.needs(x) || self.needs(scale);
        Ok(self.push(value, Op::ScaleChannels { x, scale }, needs))
    }

    /// Valid (unpadded) stride-1 cross-correlation of `x[B×H×W×Cin]` with
    /// `kernel[S×S×Cin×F]`.
    pub fn conv2d(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let [b, h, w, c] = self.rank4("conv2d", x)?;
        let [s, s2, kc, f] = self.rank4("conv2d", kernel)?;
        if s != s2 || kc != c {
            return Err(Error::dim(
                "conv2d",
                format!("kernel {} incompatible with input {}", self.shape(kernel), self.shape(x)),
            ));
        }
        if h < s || w < s {
            return Err(Error::dim(
                "conv2d",
                format!("kernel {s}×{s} larger than input {}", self.shape(x)),
            ));
        }
        let dims = ConvDims { batch: b, height: h, width: w, in_ch: c, size: s, filters: f };
        let out = kernels::conv2d_forward(self.data(x), self.data(kernel), dims);
        let value = Tensor::new(vec![b, dims.out_h(), dims.out_w(), f], out)?;
        let needs = self.needs(x) || self.needs(kernel);
        Ok(self.push(value, Op::Conv2d { x, kernel, dims }, needs))
    }

    /// 2×2 max pooling with stride 2; odd extents are floored.
    pub fn maxpool2d(&mut self, x: Var) -> Result<Var> {
        let [b, h, w, c] = self.rank4("maxpool2d", x)?;
        if h < 2 || w < 2 {
            return Err(Error::dim("maxpool2d", format!("input {} smaller than 2×2 window", self.shape(x))));
        }
        let (out, argmax) = kernels::maxpool2x2(self.data(x), b, h, w, c);
        let value = Tensor::new(vec![b, h / 2, w / 2, c], out)?;
        Ok(self.unary(x, value, Op::MaxPool { x, argmax }))
    }

    /// Per-channel spatial mean: `[B×H×W×C] -> [B×C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let [b, h, w, c] = self.rank4("global_avg_pool", x)?;
        let spatial = h * w;
        let inv = T::one() / T::of(spatial as f64);
        let mut out = vec![T::zero(); b * c];
        for (i, row) in self.data(x).chunks(c).enumerate() {
            let orow = &mut out[(i / spatial) * c..][..c];
            for (o, &v) in orow.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o *= inv;
        }
        let value = Tensor::new(vec![b, c], out)?;
        Ok(self.unary(x, value, Op::GlobalAvgPool { x, spatial }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.unary(x, value, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.unary(x, value, Op::Sigmoid(x))
    }

    /// Normalizes over every axis except the last. Returns the batch
    /// statistics in training mode so the caller can update running averages.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BatchNormMode<'_, T>,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let c = *self.dims(x).last().unwrap_or(&0);
        for p in [gamma, beta] {
            if self.dims(p) != [c] {
                return Err(Error::dim(
                    "batch_norm",
                    format!("parameter {} does not match features of {}", self.shape(p), self.shape(x)),
                ));
            }
        }
        let data = self.data(x);
        let rows = data.len() / c;
        let (mean, var, eps, training) = match mode {
            BatchNormMode::Training { eps } => {
                let inv_n = T::one() / T::of(rows as f64);
                let mut mean = vec![T::zero(); c];
                for row in data.chunks(c) {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m *= inv_n);
                let mut var = vec![T::zero(); c];
                for row in data.chunks(c) {
                    for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s *= inv_n);
                (mean, var, eps, true)
            }
            BatchNormMode::Inference { mean, var, eps } => {
                if mean.len() != c || var.len() != c {
                    return Err(Error::dim(
                        "batch_norm",
                        format!("running statistics of length {} for {c} features", mean.len()),
                    ));
                }
                (mean.to_vec(), var.to_vec(), eps, false)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let g = self.data(gamma);
        let bt = self.data(beta);
        let mut xhat = Vec::with_capacity(data.len());
        let mut out = Vec::with_capacity(data.len());
        for row in data.chunks(c) {
            for j in 0..c {
                let xh = (row[j] - mean[j]) * inv_std[j];
                xhat.push(xh);
                out.push(g[j] * xh + bt[j]);
            }
        }
        let value = Tensor::new(self.dims(x).to_vec(), out)?;
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let v = self.push(value, Op::BatchNorm { x, gamma, beta, xhat, inv_std, training }, needs);
        Ok((v, training.then_some(BatchStats { mean, var })))
    }

    /// Inverted dropout: kept activations are divided by the keep
    /// probability so inference (or `rate == 0`) is the identity and returns
    /// `x` unchanged.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Domain(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep_scale = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() >= rate { keep_scale } else { T::zero() })
            .collect();
        let out: Vec<T> = self.data(x).iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::new(self.dims(x).to_vec(), out)?;
        Ok(self.unary(x, value, Op::Dropout { x, mask }))
    }

    /// Row-wise softmax of a 2-D tensor, max-shifted for stability.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let [n, c] = self.rank2("softmax", x)?;
        let out = softmax_rows(self.data(x), c);
        let value = Tensor::new(vec![n, c], out)?;
        Ok(self.unary(x, value, Op::Softmax(x)))
    }

    /// Mean categorical cross-entropy of probability rows against one-hot
    /// targets. Probabilities are floored at 1e-12 before the logarithm.
    pub fn cross_entropy(&mut self, probs: Var, targets: &Tensor<T>) -> Result<Var> {
        let [n, c] = self.rank2("cross_entropy", probs)?;
        check_one_hot(targets, n, c)?;
        let tol = T::epsilon().sqrt() * T::of(c as f64);
        for (i, row) in self.data(probs).chunks(c).enumerate() {
            let sum: T = row.iter().copied().sum();
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) || (sum - T::one()).abs() > tol {
                return Err(Error::Domain(format!(
                    "cross_entropy row {i} is not a probability distribution (sum {sum})"
                )));
            }
        }
        let floor = T::of(PROB_FLOOR);
        let loss = self
            .data(probs)
            .iter()
            .zip(targets.data())
            .filter(|(_, &t)| t > T::zero())
            .map(|(&p, &t)| -t * p.max(floor).ln())
            .sum::<T>()
            / T::of(n as f64);
        let op = Op::CrossEntropy { probs, targets: targets.data().to_vec() };
        Ok(self.unary(probs, Tensor::scalar(loss), op))
    }

    /// Softmax followed by mean cross-entropy, computed through log-softmax.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &Tensor<T>) -> Result<Var> {
        let [n, c] = self.rank2("softmax_cross_entropy", logits)?;
        check_one_hot(targets, n, c)?;
        let mut loss = T::zero();
        for (row, trow) in self.data(logits).chunks(c).zip(targets.data().chunks(c)) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
            for (&z, &t) in row.iter().zip(trow) {
                if t > T::zero() {
                    loss -= t * (z - lse);
                }
            }
        }
        loss = loss / T::of(n as f64);
        let probs = softmax_rows(self.data(logits), c);
        let op = Op::SoftmaxCrossEntropy { logits, probs, targets: targets.data().to_vec() };
        Ok(self.unary(logits, Tensor::scalar(loss), op))
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        Ok(self.unary(x, value, Op::Reshape(x)))
    }

    /// Collapses all axes after the first.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let dims = self.dims(x);
        let n = dims[0];
        let rest = dims[1..].iter().product::<usize>().max(1);
        self.reshape(x, vec![n, rest])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total: T = self.data(x).iter().copied().sum();
        self.unary(x, Tensor::scalar(total), Op::Sum(x))
    }

    /// `Σ wᵢ·xᵢ` against fixed weights; a scalar probe for gradient checks.
    pub fn weighted_sum(&mut self, x: Var, weights: &[T]) -> Result<Var> {
        if weights.len() != self.value(x).len() {
            return Err(Error::dim(
                "weighted_sum",
                format!("{} weights for tensor {}", weights.len(), self.shape(x)),
            ));
        }
        let total = kernels::dot(self.data(x), weights);
        let op = Op::WeightedSum { x, weights: weights.to_vec() };
        Ok(self.unary(x, Tensor::scalar(total), op))
    }

    /// Reverse sweep from a scalar `loss`. Clears gradients from any earlier
    /// sweep, then visits each recorded node once in reverse order.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::dim("backward", format!("loss must be scalar, got {}", self.shape(loss))));
        }
        for node in &mut self.nodes {
            node.value.clear_grad();
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            self.nodes[i].value.set_grad(g)?;
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.iter_mut().zip(g).for_each(|(e, x)| *e += x),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out = self.nodes[i].value.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::MatMul { a, b, m, k, n } => {
                if self.needs(a) {
                    self.accumulate(grads, a, kernels::matmul_nt(g, self.data(b), m, k, n));
                }
                if self.needs(b) {
                    self.accumulate(grads, b, kernels::matmul_tn(self.data(a), g, m, k, n));
                }
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, g.to_vec());
                self.accumulate(grads, b, g.to_vec());
            }
            &Op::Mul(a, b) => {
                let ga = g.iter().zip(self.data(b)).map(|(&g, &y)| g * y).collect();
                let gb = g.iter().zip(self.data(a)).map(|(&g, &x)| g * x).collect();
                self.accumulate(grads, a, ga);
                self.accumulate(grads, b, gb);
            }
            &Op::AddBias { x, bias } => {
                let c = self.value(bias).len();
                let mut gb = vec![T::zero(); c];
                for row in g.chunks(c) {
                    gb.iter_mut().zip(row).for_each(|(s, &v)| *s += v);
                }
                self.accumulate(grads, x, g.to_vec());
                self.accumulate(grads, bias, gb);
            }
            &Op::ScaleChannels { x, scale } => {
                let [_, h, w, c] = self.rank4("scale_channels", x).expect("checked in forward");
                let s = self.data(scale);
                let xd = self.data(x);
                let mut gx = Vec::with_capacity(g.len());
                let mut gs = vec![T::zero(); s.len()];
                for (p, (grow, xrow)) in g.chunks(c).zip(xd.chunks(c)).enumerate() {
                    let base = (p / (h * w)) * c;
                    for j in 0..c {
                        gx.push(grow[j] * s[base + j]);
                        gs[base + j] += grow[j] * xrow[j];
                    }
                }
                self.accumulate(grads, x, gx);
                self.accumulate(grads, scale, gs);
            }
            &Op::Conv2d { x, kernel, dims } => {
                if self.needs(x) {
                    self.accumulate(grads, x, kernels::conv2d_backward_input(g, self.data(kernel), dims));
                }
                if self.needs(kernel) {
                    self.accumulate(grads, kernel, kernels::conv2d_backward_kernel(self.data(x), g, dims));
                }
            }
            Op::MaxPool { x, argmax } => {
                let mut gx = vec![T::zero(); self.value(*x).len()];
                for (&idx, &gv) in argmax.iter().zip(g) {
                    gx[idx] += gv;
                }
                self.accumulate(grads, *x, gx);
            }
            &Op::GlobalAvgPool { x, spatial } => {
                let c = *self.dims(x).last().expect("rank 4");
                let inv = T::one() / T::of(spatial as f64);
                let gx = (0..self.value(x).len())
                    .map(|p| g[(p / (spatial * c)) * c + p % c] * inv)
                    .collect();
                self.accumulate(grads, x, gx);
            }
            &Op::Relu(x) => {
                let gx = g
                    .iter()
                    .zip(self.data(x))
                    .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                self.accumulate(grads, x, gx);
            }
            &Op::Sigmoid(x) => {
                let gx = g.iter().zip(out).map(|(&g, &s)| g * s * (T::one() - s)).collect();
                self.accumulate(grads, x, gx);
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, training } => {
                let c = inv_std.len();
                let rows = xhat.len() / c;
                let mut sum_g = vec![T::zero(); c];
                let mut sum_gx = vec![T::zero(); c];
                for (grow, xrow) in g.chunks(c).zip(xhat.chunks(c)) {
                    for j in 0..c {
                        sum_g[j] += grow[j];
                        sum_gx[j] += grow[j] * xrow[j];
                    }
                }
                if self.needs(*x) {
                    let gm = self.data(*gamma);
                    let n = T::of(rows as f64);
                    let mut gx = Vec::with_capacity(g.len());
                    for (grow, xrow) in g.chunks(c).zip(xhat.chunks(c)) {
                        for j in 0..c {
                            let v = if *training {
                                gm[j] * inv_std[j] / n * (n * grow[j] - sum_g[j] - xrow[j] * sum_gx[j])
                            } else {
                                gm[j] * inv_std[j] * grow[j]
                            };
                            gx.push(v);
                        }
                    }
                    self.accumulate(grads, *x, gx);
                }
                self.accumulate(grads, *gamma, sum_gx);
                self.accumulate(grads, *beta, sum_g);
            }
            Op::Dropout { x, mask } => {
                let gx = g.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                self.accumulate(grads, *x, gx);
            }
            &Op::Softmax(x) => {
                let c = *self.dims(x).last().expect("rank 2");
                let mut gx = Vec::with_capacity(g.len());
                for (grow, srow) in g.chunks(c).zip(out.chunks(c)) {
                    let inner = kernels::dot(grow, srow);
                    gx.extend(grow.iter().zip(srow).map(|(&gv, &s)| s * (gv - inner)));
                }
                self.accumulate(grads, x, gx);
            }
            Op::CrossEntropy { probs, targets } => {
                let n = T::of(self.dims(*probs)[0] as f64);
                let floor = T::of(PROB_FLOOR);
                let gx = self
                    .data(*probs)
                    .iter()
                    .zip(targets)
                    .map(|(&p, &t)| if t > T::zero() && p > floor { -g[0] * t / (n * p) } else { T::zero() })
                    .collect();
                self.accumulate(grads, *probs, gx);
            }
            Op::SoftmaxCrossEntropy { logits, probs, targets } => {
                let n = T::of(self.dims(*logits)[0] as f64);
                let gx = probs.iter().zip(targets).map(|(&p, &t)| g[0] * (p - t) / n).collect();
                self.accumulate(grads, *logits, gx);
            }
            &Op::Reshape(x) => self.accumulate(grads, x, g.to_vec()),
            &Op::Sum(x) => {
                let gx = vec![g[0]; self.value(x).len()];
                self.accumulate(grads, x, gx);
            }
            Op::WeightedSum { x, weights } => {
                let gx = weights.iter().map(|&w| g[0] * w).collect();
                self.accumulate(grads, *x, gx);
            }
        }
    }
}

const PROB_FLOOR: f64 = 1e-12;

fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

fn softmax_rows<T: Real>(data: &[T], c: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        out.extend(row.iter().map(|&z| (z - max).exp()));
        let total: T = out[start..].iter().copied().sum();
        out[start..].iter_mut().for_each(|v| *v = *v / total);
    }
    out
}

fn check_one_hot<T: Real>(targets: &Tensor<T>, n: usize, c: usize) -> Result<()> {
    if targets.dims() != [n, c] {
        return Err(Error::dim("cross_entropy", format!("targets {} for predictions {n}×{c}", targets.shape())));
    }
    for (i, row) in targets.data().chunks(c).enumerate() {
        let ones = row.iter().filter(|&&t| t == T::one()).count();
        let zeros = row.iter().filter(|&&t| t == T::zero()).count();
        if ones != 1 || zeros != c - 1 {
            return Err(Error::Domain(format!("target row {i} is not one-hot")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = tape.constant(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn matmul_row_by_column() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[1, 2], &[1.0, 2.0]));
        let b = tape.constant(t(&[2, 1], &[3.0, 4.0]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).dims(), &[1, 1]);
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::zeros(vec![2, 3]).unwrap());
        let b = tape.constant(Tensor::zeros(vec![2, 3]).unwrap());
        let msg = tape.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("2×3 · 2×3"), "{msg}");
    }

    #[test]
    fn conv_all_ones() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![1, 3, 3, 1], 1.0f64).unwrap());
        let k = tape.constant(Tensor::full(vec![2, 2, 1, 1], 1.0f64).unwrap());
        let y = tape.conv2d(x, k).unwrap();
        assert_eq!(tape.value(y).dims(), &[1, 2, 2, 1]);
        assert!(tape.value(y).data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn conv_kernel_larger_than_input() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![1, 2, 2, 1], 1.0f64).unwrap());
        let k = tape.constant(Tensor::full(vec![3, 3, 1, 1], 1.0f64).unwrap());
        assert!(matches!(tape.conv2d(x, k), Err(Error::Dimension { .. })));
    }

    #[test]
    fn conv_channel_mismatch() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![1, 4, 4, 2], 1.0f64).unwrap());
        let k = tape.constant(Tensor::full(vec![3, 3, 1, 1], 1.0f64).unwrap());
        assert!(tape.conv2d(x, k).is_err());
    }

    #[test]
    fn maxpool_single_window() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[1, 2, 2, 1], &[1.0, 2.0, 3.0, 4.0]));
        let y = tape.maxpool2d(x).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0]);
        let l = tape.sum(y);
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn maxpool_tie_goes_to_first() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[1, 2, 2, 1], &[5.0, 5.0, 5.0, 5.0]));
        let y = tape.maxpool2d(x).unwrap();
        let l = tape.sum(y);
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_floors_odd_extent() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::<f32>::zeros(vec![2, 5, 7, 3]).unwrap());
        let y = tape.maxpool2d(x).unwrap();
        assert_eq!(tape.value(y).dims(), &[2, 2, 3, 3]);
    }

    #[test]
    fn global_avg_pool_values() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 2, 2, 2], &[1.0, 7.0, 2.0, 7.0, 3.0, 7.0, 4.0, 7.0]));
        let y = tape.global_avg_pool(x).unwrap();
        assert_eq!(tape.value(y).data(), &[2.5, 7.0]);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 4], &[0.0; 4]));
        let y = tape.softmax(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.25; 4]);
    }

    #[test]
    fn cross_entropy_perfect_prediction_is_zero() {
        let mut tape = Tape::new();
        let p = tape.constant(t(&[1, 3], &[0.0, 1.0, 0.0]));
        let l = tape.cross_entropy(p, &t(&[1, 3], &[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(tape.value(l).data(), &[0.0]);
    }

    #[test]
    fn cross_entropy_rejects_unnormalized() {
        let mut tape = Tape::new();
        let p = tape.constant(t(&[1, 3], &[0.5, 0.5, 0.5]));
        let err = tape.cross_entropy(p, &t(&[1, 3], &[0.0, 1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let q = tape.constant(t(&[1, 2], &[1.5, -0.5]));
        assert!(matches!(tape.cross_entropy(q, &t(&[1, 2], &[1.0, 0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn batchnorm_two_sample_batch() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[2, 1], &[-1.0, 1.0]));
        let g = tape.constant(t(&[1], &[1.0]));
        let b = tape.constant(t(&[1], &[0.0]));
        let (y, stats) = tape.batch_norm(x, g, b, BatchNormMode::Training { eps: 1e-5 }).unwrap();
        let stats = stats.unwrap();
        assert_eq!(stats.mean, vec![0.0]);
        assert_eq!(stats.var, vec![1.0]);
        let out = tape.value(y).data();
        let expected = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((out[0] + expected).abs() < 1e-12 && (out[1] - expected).abs() < 1e-12);
        let mean = (out[0] + out[1]) / 2.0;
        let var = (out[0] - mean).powi(2) / 2.0 + (out[1] - mean).powi(2) / 2.0;
        assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn dropout_identity_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tape = Tape::new();
        let x = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(tape.dropout(x, 0.5, false, &mut rng).unwrap(), x);
        assert_eq!(tape.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert!(tape.dropout(x, 1.0, true, &mut rng).is_err());
        let y = tape.dropout(x, 0.5, true, &mut rng).unwrap();
        for (&o, &i) in tape.value(y).data().iter().zip(tape.value(x).data()) {
            assert!(o == 0.0 || o == 2.0 * i);
        }
    }

    #[test]
    fn fused_softmax_ce_gradient_closed_form() {
        let mut tape = Tape::new();
        let z = tape.variable(t(&[2, 3], &[0.3, -1.2, 2.0, 0.0, 0.5, -0.5]));
        let targets = t(&[2, 3], &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let l = tape.softmax_cross_entropy(z, &targets).unwrap();
        tape.backward(l).unwrap();
        let probs = softmax_rows(tape.value(z).data(), 3);
        for ((g, p), tv) in tape.grad(z).unwrap().iter().zip(&probs).zip(targets.data()) {
            assert!((g - (p - tv) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unused_branch_has_no_grad_and_constants_stay_clean() {
        let mut tape = Tape::new();
        let a = tape.variable(t(&[2], &[1.0, 2.0]));
        let unused = tape.variable(t(&[2], &[3.0, 4.0]));
        let c = tape.constant(t(&[2], &[5.0, 6.0]));
        let p = tape.mul(a, c).unwrap();
        let l = tape.sum(p);
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(a).unwrap(), &[5.0, 6.0]);
        assert!(tape.grad(unused).is_none());
        assert!(tape.grad(c).is_none());
    }

    #[test]
    fn shared_input_accumulates() {
        let mut tape = Tape::new();
        let a = tape.variable(t(&[2], &[1.0, 2.0]));
        let s = tape.add(a, a).unwrap();
        let l = tape.sum(s);
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(a).unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let a = tape.variable(t(&[2], &[1.0, 2.0]));
        assert!(tape.backward(a).is_err());
    }
}
