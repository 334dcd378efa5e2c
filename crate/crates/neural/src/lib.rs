//! A small f64 backpropagation engine and the two emotion networks:
//! the Y-shaped RF fusion model (conv1d + LSTM branch beside a conv2d
//! scaleogram branch) and the ECG model (conv2d branch beside an IBI
//! feature branch).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod inputs;
pub mod layers;
pub mod model;
pub mod pipeline;
pub mod tensor;
pub mod train;

use rfaffect_core::signal::SignalError;
use rfaffect_core::transform::TransformError;
use thiserror::Error;

pub use layers::LayerSpec;
pub use model::{
    build_ecg_model, build_rf_model, gradient_check, Architecture, GradCheckConfig, GradCheckReport, Model,
    RfModelConfig,
};
pub use tensor::Tensor;
pub use train::{train, NetSample, Optimizer, TrainConfig};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("label {label} outside [0, {n_classes})")]
    Label { label: usize, n_classes: usize },
    #[error("numeric failure: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
