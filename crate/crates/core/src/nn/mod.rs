//! A small convolutional classifier built from first principles.
//!
//! ```text
//! 500×8 bits ─conv 8×5, 64 filters─▶ 64×496 ─relu, pool 2─▶ 64×248
//!            ─conv 5, 128 filters─▶ 128×244 ─relu, pool 2─▶ 128×122
//!            ─flatten─▶ 15616 ─dense─▶ 64 ─relu─▶ dense ─▶ 5 ─softmax─▶ p
//! ```
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32`
//! for training and inference and in `f64` for gradient checking.

mod io;
mod layers;
mod model;
mod train;

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign};

use num_traits::Float;
use thiserror::Error;

pub use io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use layers::{relu_backward, relu_in_place, softmax, Conv1d, Dense, Matrix, MaxPool, Pooled};
pub use model::{Model, ModelConfig, Params, Prediction, ShapeChain, NUM_CLASSES};
pub use train::{train, train_with_progress, EpochMetrics, TrainConfig};

/// Floating-point element type of a network.
pub trait Scalar: Float + AddAssign + MulAssign + Debug + Default + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input was tokenized under table {input:016x}, model expects {model:016x}")]
    TableMismatch { model: u64, input: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
