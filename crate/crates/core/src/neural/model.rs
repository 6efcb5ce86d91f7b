use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvGeom};
use super::spec::{Layer, ModelSpec, Shape};
use super::NeuralError;
use crate::image::ImageTensor;

pub(crate) const LOG_EPS: f64 = 1e-12;

/// Weights and biases of one layer; both empty for parameter-free layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameters of every layer, in layer order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    pub layers: Vec<LayerParams>,
}

impl Params {
    pub fn zeros(spec: &ModelSpec) -> Result<Self, NeuralError> {
        Ok(Self {
            layers: spec
                .param_sizes()?
                .into_iter()
                .map(|(w, b)| LayerParams { weights: vec![0.0; w], bias: vec![0.0; b] })
                .collect(),
        })
    }

    /// He-uniform for convolutions, Xavier-uniform for dense layers, zero biases.
    pub fn init(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Self, NeuralError> {
        let mut params = Self::zeros(spec)?;
        let shapes = spec.shapes()?;
        for (i, layer) in spec.layers.iter().enumerate() {
            let limit = match *layer {
                Layer::Conv { kernel, .. } => {
                    let fan_in = shapes[i].channels * kernel * kernel;
                    (6.0 / fan_in as f64).sqrt()
                }
                Layer::Dense { units } => {
                    let fan_in = shapes[i].len();
                    (6.0 / (fan_in + units) as f64).sqrt()
                }
                _ => continue,
            };
            for w in params.layers[i].weights.iter_mut() {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(params)
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn matches(&self, spec: &ModelSpec) -> Result<(), NeuralError> {
        let sizes = spec.param_sizes()?;
        let ok = sizes.len() == self.layers.len()
            && sizes.iter().zip(&self.layers).all(|((w, b), l)| *w == l.weights.len() && *b == l.bias.len());
        if ok {
            Ok(())
        } else {
            Err(NeuralError::Spec("parameter shapes do not match the model spec".into()))
        }
    }

    /// `self -= lr * grads`.
    pub fn step(&mut self, grads: &Params, lr: f64) {
        for (p, g) in self.iter_mut().zip(grads.iter()) {
            *p -= lr * g;
        }
    }
}

/// Per-epoch losses recorded by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub stopped_early: bool,
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
}

/// Per-channel input standardization `(x - mean) / std`, applied before the
/// first layer. Training estimates it from the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputNorm {
    pub fn identity(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }

    pub fn is_identity(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0) && self.std.iter().all(|&s| s == 1.0)
    }

    /// Population statistics over planar `C × H × W` inputs. Channels with
    /// (near) zero spread keep unit scale.
    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a [f64]>, channels: usize) -> Self {
        let mut sum = vec![0.0; channels];
        let mut sq = vec![0.0; channels];
        let mut count = 0usize;
        for x in inputs {
            let plane = x.len() / channels;
            for c in 0..channels {
                for v in &x[c * plane..(c + 1) * plane] {
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            count += plane;
        }
        if count == 0 {
            return Self::identity(channels);
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / n - m * m).max(0.0).sqrt();
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        let plane = input.len() / self.mean.len();
        input.iter().enumerate().map(|(i, v)| (v - self.mean[i / plane]) / self.std[i / plane]).collect()
    }
}

/// A model spec with its learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    spec: ModelSpec,
    params: Params,
    norm: InputNorm,
    pub meta: TrainingMeta,
}

/// Intermediate activations of one forward pass.
pub(crate) struct Trace {
    /// `acts[i]` is the input of layer `i`; the last entry is the output.
    pub(crate) acts: Vec<Vec<f64>>,
    pub(crate) argmax: Vec<Vec<usize>>,
}

impl TrainedModel {
    pub fn new(spec: ModelSpec, params: Params, meta: TrainingMeta) -> Result<Self, NeuralError> {
        spec.validate()?;
        params.matches(&spec)?;
        if !params.all_finite() {
            return Err(NeuralError::Spec("parameters must be finite".into()));
        }
        let norm = InputNorm::identity(spec.input().channels);
        Ok(Self { spec, params, norm, meta })
    }

    pub fn with_norm(mut self, norm: InputNorm) -> Result<Self, NeuralError> {
        let channels = self.spec.input().channels;
        let finite = norm.mean.iter().chain(&norm.std).all(|v| v.is_finite());
        if norm.mean.len() != channels || norm.std.len() != channels || !finite || norm.std.iter().any(|&s| s <= 0.0) {
            return Err(NeuralError::Spec(format!(
                "input normalization needs {channels} finite means and positive deviations"
            )));
        }
        self.norm = norm;
        Ok(self)
    }

    pub fn norm(&self) -> &InputNorm {
        &self.norm
    }

    /// All parameters zero: every input maps to the uniform distribution.
    pub fn zeros(spec: ModelSpec) -> Result<Self, NeuralError> {
        let params = Params::zeros(&spec)?;
        Self::new(spec, params, TrainingMeta::default())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn check_input(&self, len: usize, shape: Shape) -> Result<(), NeuralError> {
        let expected = self.spec.input();
        if len != expected.len() || shape != expected {
            return Err(NeuralError::Shape { layer: 0, name: "input", expected, actual: shape });
        }
        Ok(())
    }

    fn image_input(&self, image: &ImageTensor) -> Result<Vec<f64>, NeuralError> {
        let (h, w, c) = image.shape();
        let shape = Shape::new(c, h, w);
        self.check_input(h * w * c, shape)?;
        Ok(image.to_planar())
    }

    pub(crate) fn trace(&self, input: &[f64]) -> Result<Trace, NeuralError> {
        let shapes = self.spec.shapes()?;
        if input.len() != shapes[0].len() {
            return Err(NeuralError::Shape {
                layer: 0,
                name: "input",
                expected: shapes[0],
                actual: Shape::flat(input.len()),
            });
        }
        let mut acts = Vec::with_capacity(shapes.len());
        let mut argmax = vec![Vec::new(); self.spec.layers.len()];
        acts.push(if self.norm.is_identity() { input.to_vec() } else { self.norm.apply(input) });
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let x = &acts[i];
            let p = &self.params.layers[i];
            let mut out = vec![0.0; shapes[i + 1].len()];
            match *layer {
                Layer::Conv { kernel, stride, padding, .. } => {
                    let g = ConvGeom { input: shapes[i], output: shapes[i + 1], kernel, stride, padding };
                    kernels::conv_forward(&g, x, &p.weights, &p.bias, &mut out);
                }
                Layer::MaxPool { size, stride } => {
                    let mut idx = vec![0; out.len()];
                    kernels::maxpool_forward(shapes[i], shapes[i + 1], size, stride, x, &mut out, &mut idx);
                    argmax[i] = idx;
                }
                Layer::Relu => kernels::relu_forward(x, &mut out),
                Layer::Flatten => out.copy_from_slice(x),
                Layer::Dense { .. } => kernels::dense_forward(x, &p.weights, &p.bias, &mut out),
                Layer::Softmax => out = kernels::softmax(x),
            }
            acts.push(out);
        }
        Ok(Trace { acts, argmax })
    }

    /// Class probabilities for one planar (`C × H × W`) input.
    pub fn forward_planar(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        Ok(self.trace(input)?.acts.pop().expect("output present"))
    }

    /// Probability rows, one per image.
    pub fn forward(&self, batch: &[ImageTensor]) -> Result<Vec<Vec<f64>>, NeuralError> {
        batch.iter().map(|img| self.forward_planar(&self.image_input(img)?)).collect()
    }

    /// Most probable class index (lowest index on ties) with the full distribution.
    pub fn predict(&self, image: &ImageTensor) -> Result<(usize, Vec<f64>), NeuralError> {
        let probs = self.forward_planar(&self.image_input(image)?)?;
        Ok((argmax(&probs), probs))
    }

    /// Accumulates `d loss / d params` for one sample into `grads`, where the
    /// loss is the batch mean of categorical cross-entropy and `batch_size`
    /// is the mean's denominator. Returns this sample's unscaled loss.
    pub(crate) fn accumulate_gradients(
        &self,
        input: &[f64],
        target: &[f64],
        batch_size: usize,
        grads: &mut Params,
    ) -> Result<f64, NeuralError> {
        let shapes = self.spec.shapes()?;
        let trace = self.trace(input)?;
        let probs = trace.acts.last().expect("output present");
        if target.len() != probs.len() {
            return Err(NeuralError::Shape {
                layer: self.spec.layers.len() - 1,
                name: "softmax",
                expected: Shape::flat(probs.len()),
                actual: Shape::flat(target.len()),
            });
        }
        let sample_loss = cross_entropy(probs, target);

        // softmax + cross-entropy: d/dlogits = (p - y) / batch
        let scale = 1.0 / batch_size as f64;
        let mut delta: Vec<f64> = probs.iter().zip(target).map(|(p, y)| (p - y) * scale).collect();
        let last = self.spec.layers.len() - 1;
        for i in (0..last).rev() {
            let x = &trace.acts[i];
            let need_input_grad = i > 0;
            let mut grad_in = vec![0.0; if need_input_grad { shapes[i].len() } else { 0 }];
            let gi = need_input_grad.then_some(grad_in.as_mut_slice());
            let p = &self.params.layers[i];
            let g = &mut grads.layers[i];
            match self.spec.layers[i] {
                Layer::Conv { kernel, stride, padding, .. } => {
                    let geom = ConvGeom { input: shapes[i], output: shapes[i + 1], kernel, stride, padding };
                    kernels::conv_backward(&geom, x, &p.weights, &delta, &mut g.weights, &mut g.bias, gi);
                }
                Layer::MaxPool { .. } => {
                    if let Some(gi) = gi {
                        kernels::maxpool_backward(&trace.argmax[i], &delta, gi);
                    }
                }
                Layer::Relu => {
                    if let Some(gi) = gi {
                        kernels::relu_backward(x, &delta, gi);
                    }
                }
                Layer::Flatten => {
                    if let Some(gi) = gi {
                        gi.copy_from_slice(&delta);
                    }
                }
                Layer::Dense { .. } => {
                    kernels::dense_backward(x, &p.weights, &delta, &mut g.weights, &mut g.bias, gi);
                }
                Layer::Softmax => unreachable!("softmax is only the final layer"),
            }
            if !need_input_grad {
                break;
            }
            delta = grad_in;
        }
        Ok(sample_loss)
    }

    /// Gradients of the mean cross-entropy over the batch, plus that loss.
    pub fn backward_planar(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(Params, f64), NeuralError> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(NeuralError::EmptySet("batch must be non-empty with one target per input".into()));
        }
        let mut grads = Params::zeros(&self.spec)?;
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            total += self.accumulate_gradients(x, y, inputs.len(), &mut grads)?;
        }
        Ok((grads, total / inputs.len() as f64))
    }

    pub fn backward(&self, batch: &[ImageTensor], targets: &[Vec<f64>]) -> Result<(Params, f64), NeuralError> {
        let inputs = batch.iter().map(|img| self.image_input(img)).collect::<Result<Vec<_>, _>>()?;
        self.backward_planar(&inputs, targets)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn cross_entropy(probs: &[f64], target: &[f64]) -> f64 {
    -probs.iter().zip(target).map(|(p, y)| y * (p + LOG_EPS).ln()).sum::<f64>()
}

/// Mean categorical cross-entropy `−Σ y·ln(p + 1e-12)` over rows.
pub fn loss(probs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    assert_eq!(probs.len(), targets.len(), "one target row per probability row");
    if probs.is_empty() {
        return 0.0;
    }
    probs.iter().zip(targets).map(|(p, y)| cross_entropy(p, y)).sum::<f64>() / probs.len() as f64
}

pub fn one_hot(label: usize, num_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_classes];
    v[label] = 1.0;
    v
}
