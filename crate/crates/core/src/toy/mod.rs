//! Desk-scale conditional adversarial training.
//!
//! A fully connected generator maps `(x_s, x_b, z)` to an image; a fully
//! connected discriminator scores `(x_s, x_b, y)`. Both are trained with
//! plain gradient steps on the adversarial objective plus the weighted
//! tonality-alignment loss, on procedurally generated polygon images.

mod net;
mod sample;
pub mod soft_hist;
mod train;

use thiserror::Error;

pub use net::{Activation, ForwardCache, Gradients, Layer, TinyNet};
pub use sample::{gen_procedural_sample, ShapeSample};
pub use train::{
    build_models, train_toy_tagan, train_toy_tagan_observed, Models, StepRecord, ToyConfig, TrainingReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cache does not belong to the current network parameters")]
    StaleCache,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at step {step}")]
    DivergenceDetected { step: usize, report: Box<TrainingReport> },
}
