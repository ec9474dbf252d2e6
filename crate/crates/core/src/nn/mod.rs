//! Small from-scratch network engine, double precision throughout.
//!
//! Layers own their parameters and the activations cached by the last
//! training-mode forward pass; `backward` consumes those caches and
//! accumulates parameter gradients. A [`Model`] is up to two input branches
//! (image, feature vector) whose outputs are concatenated feature-wise and fed
//! to a head that ends in softmax.
//!
//! Batch work fans out per sample with rayon, but every cross-sample sum is
//! reduced in sample order, so results do not depend on the worker count.

mod adam;
mod checkpoint;
mod gemm;
mod layers;
mod loss;
mod model;
mod tensor;
mod train;

use thiserror::Error;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry};
pub use layers::{Conv3x3, Dense, Dropout, Layer, LayerSpec, MaxPool2x2, Mode, Param};
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use model::{Architecture, BranchShapes, Inputs, Model, Sequential};
pub use tensor::Tensor;
pub use train::{argmax, evaluate_loss, train, train_with_callback, Dataset, EpochRecord, History, TrainConfig};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid layer setting: {0}")]
    Layer(String),
    #[error("targets must be one-hot; row {0} is not")]
    NotOneHot(usize),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("empty dataset: {0}")]
    Empty(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
