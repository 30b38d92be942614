use indexmap::IndexMap;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::init::{layer_rng, Init};
use super::params::{ParamRole, ParameterStore};
use super::se::{se_block_forward, se_hidden_width, SeWeights};
use crate::error::{Error, Result};
use crate::tensor::{BatchNormMode, Real, Tape, Tensor, Var};

/// Pointwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<T: Real>(self, tape: &mut Tape<T>, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Identity => x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchNormConfig {
    pub eps: f64,
    /// Weight of the old running value: `running = m·running + (1−m)·batch`.
    pub momentum: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        BatchNormConfig { eps: 1e-5, momentum: 0.99 }
    }
}

/// Declarative layer description. Each variant carries only the fields that
/// matter for its kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { filters: usize, kernel_size: usize },
    BatchNorm(BatchNormConfig),
    SeBlock { reduction: usize, inner: Activation },
    Activation(Activation),
    MaxPool,
    Dense { units: usize, init: Init },
    Dropout { rate: f64 },
    Softmax,
    Flatten,
}

impl LayerSpec {
    pub fn relu() -> Self {
        LayerSpec::Activation(Activation::Relu)
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: &str| Err(Error::Spec(format!("{self:?} cannot follow input {input:?}: {what}")));
        match *self {
            LayerSpec::Conv { filters, kernel_size } => {
                let &[h, w, _] = input else { return bad("expected H×W×C") };
                if filters == 0 || kernel_size == 0 {
                    return bad("filters and kernel size must be positive");
                }
                if h < kernel_size || w < kernel_size {
                    return bad("kernel larger than input");
                }
                Ok(vec![h - kernel_size + 1, w - kernel_size + 1, filters])
            }
            LayerSpec::MaxPool => {
                let &[h, w, c] = input else { return bad("expected H×W×C") };
                if h < 2 || w < 2 {
                    return bad("spatial extent below the 2×2 window");
                }
                Ok(vec![h / 2, w / 2, c])
            }
            LayerSpec::SeBlock { reduction, .. } => {
                if input.len() != 3 {
                    return bad("expected H×W×C");
                }
                if reduction == 0 {
                    return bad("reduction ratio must be at least 1");
                }
                Ok(input.to_vec())
            }
            LayerSpec::Dense { units, .. } => {
                if input.len() != 1 {
                    return bad("dense layers need a flat input");
                }
                if units == 0 {
                    return bad("units must be positive");
                }
                Ok(vec![units])
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return bad("dropout rate outside [0, 1)");
                }
                Ok(input.to_vec())
            }
            LayerSpec::Softmax => {
                if input.len() != 1 {
                    return bad("softmax needs a flat input");
                }
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::BatchNorm(_) | LayerSpec::Activation(_) => Ok(input.to_vec()),
        }
    }
}

/// A layer bound to its parameter names in a [`ParameterStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    name: String,
    spec: LayerSpec,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

impl Layer {
    /// Allocates and registers the layer's parameters under `name/…`.
    /// Initialization draws from a stream derived from `(seed, name)`.
    pub fn init<T: Real>(
        name: impl Into<String>,
        spec: LayerSpec,
        input_shape: &[usize],
        seed: u64,
        store: &mut ParameterStore<T>,
    ) -> Result<Layer> {
        let name = name.into();
        let output_shape = spec.output_shape(input_shape)?;
        let mut rng = layer_rng(seed, &name);
        let p = |suffix: &str| format!("{name}/{suffix}");
        match spec {
            LayerSpec::Conv { filters, kernel_size: s } => {
                let cin = input_shape[2];
                let kernel = Init::HeUniform.sample(vec![s, s, cin, filters], s * s * cin, s * s * filters, &mut rng);
                store.insert(p("kernel"), kernel, ParamRole::Weight)?;
                store.insert(p("bias"), Tensor::zeros(vec![filters])?, ParamRole::Bias)?;
            }
            LayerSpec::BatchNorm(_) => {
                let c = *input_shape.last().expect("non-empty shape");
                store.insert(p("gamma"), Tensor::full(vec![c], T::one())?, ParamRole::Gamma)?;
                store.insert(p("beta"), Tensor::zeros(vec![c])?, ParamRole::Beta)?;
                store.insert(p("running_mean"), Tensor::zeros(vec![c])?, ParamRole::RunningMean)?;
                store.insert(p("running_var"), Tensor::full(vec![c], T::one())?, ParamRole::RunningVar)?;
            }
            LayerSpec::SeBlock { reduction, .. } => {
                let c = input_shape[2];
                let hidden = se_hidden_width(c, reduction);
                let w1 = Init::GlorotUniform.sample(vec![c, hidden], c, hidden, &mut rng);
                let w2 = Init::GlorotUniform.sample(vec![hidden, c], hidden, c, &mut rng);
                store.insert(p("fc1/weight"), w1, ParamRole::Weight)?;
                store.insert(p("fc1/bias"), Tensor::zeros(vec![hidden])?, ParamRole::Bias)?;
                store.insert(p("fc2/weight"), w2, ParamRole::Weight)?;
                store.insert(p("fc2/bias"), Tensor::zeros(vec![c])?, ParamRole::Bias)?;
            }
            LayerSpec::Dense { units, init } => {
                let k = input_shape[0];
                store.insert(p("weight"), init.sample(vec![k, units], k, units, &mut rng), ParamRole::Weight)?;
                store.insert(p("bias"), Tensor::zeros(vec![units])?, ParamRole::Bias)?;
            }
            _ => {}
        }
        Ok(Layer {
            name,
            spec,
            input_shape: input_shape.to_vec(),
            output_shape,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    /// Names of the parameters this layer owns, in registration order.
    pub fn param_names(&self) -> Vec<String> {
        let suffixes: &[&str] = match self.spec {
            LayerSpec::Conv { .. } => &["kernel", "bias"],
            LayerSpec::BatchNorm(_) => &["gamma", "beta", "running_mean", "running_var"],
            LayerSpec::SeBlock { .. } => &["fc1/weight", "fc1/bias", "fc2/weight", "fc2/bias"],
            LayerSpec::Dense { .. } => &["weight", "bias"],
            _ => &[],
        };
        suffixes.iter().map(|s| format!("{}/{s}", self.name)).collect()
    }

    pub fn forward<T: Real>(&self, ctx: &mut Forward<'_, T>, x: Var) -> Result<Var> {
        let dims = ctx.tape.shape(x).dims();
        if dims[1..] != self.input_shape[..] {
            return Err(Error::dim(
                "layer_forward",
                format!("{} expects per-sample input {:?}, got {}", self.name, self.input_shape, ctx.tape.shape(x)),
            ));
        }
        let p = |suffix: &str| format!("{}/{suffix}", self.name);
        match self.spec {
            LayerSpec::Conv { .. } => {
                let k = ctx.param(&p("kernel"))?;
                let b = ctx.param(&p("bias"))?;
                let y = ctx.tape.conv2d(x, k)?;
                ctx.tape.add_bias(y, b)
            }
            LayerSpec::BatchNorm(cfg) => ctx.batch_norm(&self.name, x, cfg),
            LayerSpec::SeBlock { inner, .. } => {
                let w = SeWeights {
                    fc1_weight: ctx.param(&p("fc1/weight"))?,
                    fc1_bias: ctx.param(&p("fc1/bias"))?,
                    fc2_weight: ctx.param(&p("fc2/weight"))?,
                    fc2_bias: ctx.param(&p("fc2/bias"))?,
                };
                se_block_forward(&mut ctx.tape, x, &w, inner)
            }
            LayerSpec::Activation(a) => Ok(a.apply(&mut ctx.tape, x)),
            LayerSpec::MaxPool => ctx.tape.maxpool2d(x),
            LayerSpec::Dense { .. } => {
                let w = ctx.param(&p("weight"))?;
                let b = ctx.param(&p("bias"))?;
                let y = ctx.tape.matmul(x, w)?;
                ctx.tape.add_bias(y, b)
            }
            LayerSpec::Dropout { rate } => {
                let training = ctx.training;
                ctx.tape.dropout(x, rate, training, &mut *ctx.rng)
            }
            LayerSpec::Softmax => ctx.tape.softmax(x),
            LayerSpec::Flatten => ctx.tape.flatten(x),
        }
    }
}

/// One forward pass: a fresh tape plus lazily bound parameter leaves.
///
/// In training mode batchnorm layers update their running statistics in the
/// store as a side effect.
pub struct Forward<'a, T: Real> {
    pub tape: Tape<T>,
    store: &'a mut ParameterStore<T>,
    bound: IndexMap<String, Var>,
    training: bool,
    rng: &'a mut dyn RngCore,
}

impl<'a, T: Real> Forward<'a, T> {
    pub fn new(store: &'a mut ParameterStore<T>, training: bool, rng: &'a mut dyn RngCore) -> Self {
        Forward {
            tape: Tape::new(),
            store,
            bound: IndexMap::new(),
            training,
            rng,
        }
    }

    pub fn training(&self) -> bool {
        self.training
    }

    pub fn store(&self) -> &ParameterStore<T> {
        self.store
    }

    /// Tape leaf for a stored parameter, created on first use.
    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let tensor = self.store.tensor(name)?.clone();
        let v = self.tape.leaf(tensor);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    fn batch_norm(&mut self, name: &str, x: Var, cfg: BatchNormConfig) -> Result<Var> {
        let gamma = self.param(&format!("{name}/gamma"))?;
        let beta = self.param(&format!("{name}/beta"))?;
        let mean_name = format!("{name}/running_mean");
        let var_name = format!("{name}/running_var");
        let eps = T::of(cfg.eps);
        if !self.training {
            let mean = self.store.tensor(&mean_name)?.data().to_vec();
            let var = self.store.tensor(&var_name)?.data().to_vec();
            let mode = BatchNormMode::Inference { mean: &mean, var: &var, eps };
            return Ok(self.tape.batch_norm(x, gamma, beta, mode)?.0);
        }
        let (y, stats) = self.tape.batch_norm(x, gamma, beta, BatchNormMode::Training { eps })?;
        let stats = stats.expect("training mode yields statistics");
        let m = T::of(cfg.momentum);
        let keep = T::one() - m;
        for (r, &b) in self.store.tensor_mut(&mean_name)?.data_mut().iter_mut().zip(&stats.mean) {
            *r = m * *r + keep * b;
        }
        for (r, &b) in self.store.tensor_mut(&var_name)?.data_mut().iter_mut().zip(&stats.var) {
            *r = m * *r + keep * b;
        }
        Ok(y)
    }

    /// Runs the reverse sweep and moves each bound parameter's gradient into
    /// the store.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.tape.backward(loss)?;
        for (name, &v) in &self.bound {
            if let Some(g) = self.tape.take_grad(v) {
                self.store.tensor_mut(name)?.set_grad(g)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conv_init_shapes() {
        let mut store = ParameterStore::<f32>::new();
        let spec = LayerSpec::Conv { filters: 32, kernel_size: 5 };
        let layer = Layer::init("stage1/conv", spec, &[200, 200, 3], 1, &mut store).unwrap();
        assert_eq!(store.tensor("stage1/conv/kernel").unwrap().dims(), &[5, 5, 3, 32]);
        assert_eq!(store.tensor("stage1/conv/bias").unwrap().dims(), &[32]);
        assert_eq!(layer.output_shape(), &[196, 196, 32]);
    }

    #[test]
    fn dense_init_on_flattened_chain() {
        let mut store = ParameterStore::<f32>::new();
        let flat = Layer::init("f", LayerSpec::Flatten, &[5, 5, 256], 1, &mut store).unwrap();
        assert_eq!(flat.output_shape(), &[6400]);
        let spec = LayerSpec::Dense { units: 256, init: Init::HeUniform };
        Layer::init("d", spec, flat.output_shape(), 1, &mut store).unwrap();
        assert_eq!(store.tensor("d/weight").unwrap().dims(), &[6400, 256]);
    }

    #[test]
    fn same_seed_same_parameters() {
        let make = || {
            let mut store = ParameterStore::<f32>::new();
            let spec = LayerSpec::Conv { filters: 4, kernel_size: 3 };
            Layer::init("c", spec, &[8, 8, 3], 42, &mut store).unwrap();
            store
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn incompatible_shapes_rejected() {
        let mut store = ParameterStore::<f32>::new();
        let dense = LayerSpec::Dense { units: 4, init: Init::HeUniform };
        assert!(Layer::init("d", dense, &[4, 4, 3], 0, &mut store).is_err());
        let conv = LayerSpec::Conv { filters: 4, kernel_size: 5 };
        assert!(Layer::init("c", conv, &[4, 4, 3], 0, &mut store).is_err());
        let se = LayerSpec::SeBlock { reduction: 0, inner: Activation::Relu };
        assert!(Layer::init("s", se, &[4, 4, 3], 0, &mut store).is_err());
    }

    #[test]
    fn forward_checks_input_shape() {
        let mut store = ParameterStore::<f32>::new();
        let layer = Layer::init("p", LayerSpec::MaxPool, &[196, 196, 32], 0, &mut store).unwrap();
        assert_eq!(layer.output_shape(), &[98, 98, 32]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = Forward::new(&mut store, false, &mut rng);
        let x = ctx.tape.constant(Tensor::zeros(vec![1, 10, 10, 32]).unwrap());
        assert!(matches!(layer.forward(&mut ctx, x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn dropout_inference_is_identity() {
        let mut store = ParameterStore::<f32>::new();
        let layer = Layer::init("d", LayerSpec::Dropout { rate: 0.5 }, &[6], 0, &mut store).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = Forward::new(&mut store, false, &mut rng);
        let input = Tensor::new(vec![2, 6], (0..12).map(|v| v as f32).collect()).unwrap();
        let x = ctx.tape.constant(input.clone());
        let y = layer.forward(&mut ctx, x).unwrap();
        assert_eq!(ctx.tape.value(y).data(), input.data());
    }

    #[test]
    fn batchnorm_training_centers_and_updates_running_stats() {
        let mut store = ParameterStore::<f64>::new();
        let layer = Layer::init("bn", LayerSpec::BatchNorm(BatchNormConfig::default()), &[3], 0, &mut store).unwrap();
        let data: Vec<f64> = (0..12).map(|v| (v as f64 * 1.7).sin() * 5.0 + 2.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = Forward::new(&mut store, true, &mut rng);
        let x = ctx.tape.constant(Tensor::new(vec![4, 3], data.clone()).unwrap());
        let y = layer.forward(&mut ctx, x).unwrap();
        let out = ctx.tape.value(y).data().to_vec();
        for j in 0..3 {
            let mean: f64 = (0..4).map(|i| out[i * 3 + j]).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-5);
        }
        let batch_mean0: f64 = (0..4).map(|i| data[i * 3]).sum::<f64>() / 4.0;
        let running = store.tensor("bn/running_mean").unwrap().data()[0];
        assert!((running - 0.01 * batch_mean0).abs() < 1e-12);
    }
}
