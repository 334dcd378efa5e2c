//! Signal processing, synthetic radar data, feature extraction, classical
//! classifiers and evaluation for RF-based emotion recognition.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`] holds the [`TimeSeries`] carrier and preprocessing filters.
//! * [`synth`] simulates body motion, the radar phase response and ECG traces.
//! * [`transform`] provides FFT magnitudes, periodograms and Morlet scaleograms.
//! * [`features`] extracts the 7-entry RF vector, R-peaks, 81 IBI features and mRmR.
//! * [`classic`] implements KNN, CART, random forest, LDA and one-vs-rest SVM.
//! * [`eval`] contains LOOCV, confusion matrices, PRF metrics, ROC and t-SNE.
//! * [`pipeline`] wires preprocessing and features into the per-fold learners
//!   used by LOOCV.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classic;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod matrix;
pub mod pipeline;
pub mod seed;
pub mod signal;
pub mod synth;
pub mod transform;

pub use dataset::{Emotion, LabeledDataset, Sample};
pub use matrix::Matrix;
pub use signal::TimeSeries;
