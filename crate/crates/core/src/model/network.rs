use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::nn::{Forward, Init, Layer, LayerSpec, ParameterStore};
use crate::tensor::{Real, Tensor, Var};

pub const CLASSIFIER: &str = "classifier";

/// An assembled CNN-SENet: the layer sequence plus its parameters and
/// batchnorm running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SenetModel<T: Real = f32> {
    spec: ModelSpec,
    params: ParameterStore<T>,
    layers: Vec<Layer>,
}

fn layer_plan(spec: &ModelSpec) -> Vec<(String, LayerSpec)> {
    let bn = LayerSpec::BatchNorm(spec.batch_norm_config);
    let mut plan = Vec::new();
    for (i, st) in spec.stages.iter().enumerate() {
        let p = format!("stage{}", i + 1);
        plan.push((format!("{p}/conv"), LayerSpec::Conv { filters: st.filters, kernel_size: st.kernel_size }));
        if spec.batch_norm {
            plan.push((format!("{p}/bn"), bn.clone()));
        }
        if spec.se_blocks {
            let se = LayerSpec::SeBlock { reduction: spec.reduction_ratio, inner: spec.se_inner_activation };
            plan.push((format!("{p}/se"), se));
        }
        plan.push((format!("{p}/relu"), LayerSpec::relu()));
        plan.push((format!("{p}/pool"), LayerSpec::MaxPool));
    }
    let dense = LayerSpec::Dense { units: spec.fc_units, init: Init::HeUniform };
    plan.push(("head/flatten".into(), LayerSpec::Flatten));
    plan.push(("head/dense1".into(), dense.clone()));
    if spec.batch_norm {
        plan.push(("head/bn1".into(), bn.clone()));
    }
    plan.push(("head/dense2".into(), dense));
    if spec.batch_norm {
        plan.push(("head/bn2".into(), bn));
    }
    plan.push(("head/activation".into(), LayerSpec::Activation(spec.head_activation)));
    plan.push(("head/dropout".into(), LayerSpec::Dropout { rate: spec.dropout_rate }));
    plan.push((CLASSIFIER.into(), classifier_spec(spec.num_classes)));
    plan.push(("softmax".into(), LayerSpec::Softmax));
    plan
}

fn check_input(s: &ModelSpec, dims: &[usize]) -> Result<()> {
    match *dims {
        [_, h, w, c] if h == s.height && w == s.width && c == s.channels => Ok(()),
        _ => Err(Error::dim(
            "forward",
            format!(
                "expected N×{}×{}×{} images, got {}",
                s.height,
                s.width,
                s.channels,
                dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("×")
            ),
        )),
    }
}

/// All layers but the trailing softmax.
fn run_layers<T: Real>(layers: &[Layer], ctx: &mut Forward<'_, T>, input: Var) -> Result<Var> {
    let mut x = input;
    for layer in &layers[..layers.len() - 1] {
        x = layer.forward(ctx, x)?;
    }
    Ok(x)
}

fn classifier_spec(classes: usize) -> LayerSpec {
    LayerSpec::Dense { units: classes, init: Init::GlorotUniform }
}

impl<T: Real> SenetModel<T> {
    /// Builds the layer stack and draws fresh parameters.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut params = ParameterStore::new();
        let mut layers = Vec::new();
        let mut shape = vec![spec.height, spec.width, spec.channels];
        for (name, ls) in layer_plan(spec) {
            let layer = Layer::init(name, ls, &shape, seed, &mut params)?;
            shape = layer.output_shape().to_vec();
            layers.push(layer);
        }
        Ok(SenetModel { spec: spec.clone(), params, layers })
    }

    /// Rebuilds the layer stack of `spec` around existing parameters, which
    /// must match by name, shape, and order.
    pub fn from_parts(spec: &ModelSpec, params: ParameterStore<T>) -> Result<Self> {
        let skeleton = SenetModel::<T>::build(spec, 0)?;
        let expected: Vec<_> = skeleton.params.iter().map(|(n, p)| (n.to_string(), p.tensor.shape().clone())).collect();
        let actual: Vec<_> = params.iter().map(|(n, p)| (n.to_string(), p.tensor.shape().clone())).collect();
        if expected != actual {
            return Err(Error::Format(format!(
                "parameter layout does not match spec (expected {} entries, found {})",
                expected.len(),
                actual.len()
            )));
        }
        Ok(SenetModel { spec: spec.clone(), params, layers: skeleton.layers })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParameterStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore<T> {
        &mut self.params
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Records the logits of `batch` on a fresh training-or-inference pass
    /// and hands the live forward context to `f` (used for loss and
    /// backward).
    pub fn with_forward<R>(
        &mut self,
        batch: &Tensor<T>,
        training: bool,
        rng: &mut dyn RngCore,
        f: impl FnOnce(&mut Forward<'_, T>, Var) -> Result<R>,
    ) -> Result<R> {
        check_input(&self.spec, batch.dims())?;
        let mut ctx = Forward::new(&mut self.params, training, rng);
        let input = ctx.tape.constant(batch.clone());
        let logits = run_layers(&self.layers, &mut ctx, input)?;
        f(&mut ctx, logits)
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    /// Records the network up to (excluding) the final softmax and returns
    /// the logits.
    pub fn forward_logits(&self, ctx: &mut Forward<'_, T>, input: Var) -> Result<Var> {
        check_input(&self.spec, ctx.tape.shape(input).dims())?;
        run_layers(&self.layers, ctx, input)
    }

    /// Class probabilities `N×C`.
    pub fn forward(&mut self, batch: &Tensor<T>, training: bool, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
        self.with_forward(batch, training, rng, |ctx, logits| {
            let probs = ctx.tape.softmax(logits)?;
            Ok(ctx.tape.value(probs).clone())
        })
    }

    /// Inference-mode probabilities. Takes `&self`: running statistics are
    /// only read.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let mut params = self.params.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = Forward::new(&mut params, false, &mut rng);
        let input = ctx.tape.constant(batch.clone());
        let logits = self.forward_logits(&mut ctx, input)?;
        let probs = ctx.tape.softmax(logits)?;
        Ok(ctx.tape.value(probs).clone())
    }

    /// Swaps the final dense layer for a freshly initialized one with
    /// `classes` outputs. Every other parameter and running statistic is
    /// left untouched and all layers stay trainable.
    pub fn replace_classifier(mut self, classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Spec(format!("classifier needs at least 2 outputs, got {classes}")));
        }
        let idx = self
            .layers
            .iter()
            .position(|l| l.name() == CLASSIFIER)
            .expect("classifier layer present");
        for name in self.layers[idx].param_names() {
            self.params.remove(&name);
        }
        let input = self.layers[idx].input_shape().to_vec();
        let layer = Layer::init(CLASSIFIER, classifier_spec(classes), &input, seed, &mut self.params)?;
        let out = layer.output_shape().to_vec();
        self.layers[idx] = layer;
        let softmax = Layer::init("softmax", LayerSpec::Softmax, &out, seed, &mut self.params)?;
        self.layers[idx + 1] = softmax;
        self.spec.num_classes = classes;
        Ok(self)
    }
}
