use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{loss, one_hot, EpochRecord, InputNorm, Params, TrainedModel, TrainingMeta};
use super::spec::ModelSpec;
use super::NeuralError;
use crate::image::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Standardize inputs per channel with training-set statistics.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, batch_size: 16, max_epochs: 100, patience: 10, seed: 42, standardize: true }
    }
}

/// A planar (`C × H × W`) input with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub label: usize,
}

impl Example {
    pub fn from_image(image: &ImageTensor, label: usize) -> Self {
        Self { input: image.to_planar(), label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strictly lower
/// validation loss and remembers the best epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: 0, stale: 0 }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> Verdict {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.stale = 0;
            Verdict::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                Verdict::Stop
            } else {
                Verdict::NoImprovement
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Mean cross-entropy of `model` over `set`.
pub fn evaluate_loss(model: &TrainedModel, set: &[Example]) -> Result<f64, NeuralError> {
    let n = model.spec().num_classes;
    let probs = set.iter().map(|e| model.forward_planar(&e.input)).collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<Vec<f64>> = set.iter().map(|e| one_hot(e.label, n)).collect();
    Ok(loss(&probs, &targets))
}

/// Mini-batch SGD with early stopping on validation loss; returns the
/// best-validation parameters.
pub fn train(
    spec: &ModelSpec,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainedModel, NeuralError> {
    train_with(spec, train_set, cfg, None, |model, _epoch| evaluate_loss(model, val_set))
}

/// Like [`train`], starting from `init` when given (fine-tuning: its
/// parameters and input normalization are reused) and asking `validate` for
/// the monitored loss after every epoch.
pub fn train_with<F>(
    spec: &ModelSpec,
    train_set: &[Example],
    cfg: &TrainConfig,
    init: Option<&TrainedModel>,
    mut validate: F,
) -> Result<TrainedModel, NeuralError>
where
    F: FnMut(&TrainedModel, usize) -> Result<f64, NeuralError>,
{
    spec.validate()?;
    if train_set.is_empty() {
        return Err(NeuralError::EmptySet("training set is empty".into()));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(NeuralError::Spec("batch_size and max_epochs must be positive".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(NeuralError::Spec(format!("learning rate must be positive, got {}", cfg.learning_rate)));
    }
    let classes = spec.num_classes;
    if let Some(e) = train_set.iter().find(|e| e.label >= classes) {
        return Err(NeuralError::Spec(format!("label {} out of range for {classes} classes", e.label)));
    }
    for c in 0..classes {
        if !train_set.iter().any(|e| e.label == c) {
            return Err(NeuralError::MissingClass(c));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (params, norm) = match init {
        Some(base) => {
            if base.spec() != spec {
                return Err(NeuralError::Spec("initial model has a different architecture".into()));
            }
            (base.params().clone(), base.norm().clone())
        }
        None => {
            let channels = spec.input().channels;
            let norm = if cfg.standardize {
                InputNorm::fit(train_set.iter().map(|e| e.input.as_slice()), channels)
            } else {
                InputNorm::identity(channels)
            };
            (Params::init(spec, &mut rng)?, norm)
        }
    };
    let mut model = TrainedModel::new(spec.clone(), params, TrainingMeta::default())?.with_norm(norm.clone())?;
    let targets: Vec<Vec<f64>> = (0..classes).map(|c| one_hot(c, classes)).collect();

    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params().clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = Params::zeros(spec)?;
            let mut batch_loss = 0.0;
            for &i in chunk {
                let e = &train_set[i];
                batch_loss += model.accumulate_gradients(&e.input, &targets[e.label], chunk.len(), &mut grads)?;
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(NeuralError::Diverged { epoch, batch: b + 1 });
            }
            model.params_mut().step(&grads, cfg.learning_rate);
            if !model.params().all_finite() {
                return Err(NeuralError::Diverged { epoch, batch: b + 1 });
            }
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = validate(&model, epoch)?;
        if !val_loss.is_finite() {
            return Err(NeuralError::Diverged { epoch, batch: 0 });
        }
        history.push(EpochRecord { epoch, train_loss, val_loss });
        match stopper.observe(epoch, val_loss) {
            Verdict::Improved => best_params = model.params().clone(),
            Verdict::NoImprovement => {}
            Verdict::Stop => {
                stopped_early = true;
                break;
            }
        }
    }

    let last = history.last().expect("at least one epoch ran").clone();
    let meta = TrainingMeta {
        epochs_run: history.len(),
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best(),
        final_train_loss: last.train_loss,
        final_val_loss: last.val_loss,
        stopped_early,
        patience: cfg.patience,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        history,
    };
    TrainedModel::new(spec.clone(), best_params, meta)?.with_norm(norm)
}
