//! Small sequential CNNs trained from scratch: convolution, max-pool, ReLU,
//! dense and softmax layers, categorical cross-entropy, mini-batch SGD and
//! early stopping.

mod kernels;
mod model;
pub mod serialize;
mod spec;
mod train;

use thiserror::Error;

pub use kernels::softmax;
pub use model::{argmax, loss, one_hot, EpochRecord, InputNorm, LayerParams, Params, TrainedModel, TrainingMeta};
pub use spec::{Layer, ModelSpec, Shape};
pub use train::{evaluate_loss, train, train_with, EarlyStopping, Example, TrainConfig, Verdict};

pub use crate::road::RoadClass;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("layer {layer} ({name}): expected shape {expected}, got {actual}")]
    Shape { layer: usize, name: &'static str, expected: Shape, actual: Shape },
    #[error("invalid model: {0}")]
    Spec(String),
    #[error("{0}")]
    EmptySet(String),
    #[error("class {0} has no training examples")]
    MissingClass(usize),
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
