//! Network inputs built from preprocessed recordings, and sliding-window
//! inference over a long recording.

use rfaffect_core::pipeline::RfPreprocess;
use rfaffect_core::signal::{self, NormalizationMethod};
use rfaffect_core::transform::{self, area_pool};
use rfaffect_core::{Matrix, TimeSeries};
use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::tensor::Tensor;
use crate::NnError;

/// Input geometry of the RF network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfInputConfig {
    pub signal_len: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub n_scales: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Upper edge of the spectrum kept for the FFT channel.
    pub fft_max_hz: f64,
}

impl Default for RfInputConfig {
    fn default() -> Self {
        Self {
            signal_len: 128,
            image_h: 16,
            image_w: 16,
            n_scales: 64,
            f_min: 0.1,
            f_max: 8.0,
            fft_max_hz: 8.0,
        }
    }
}

impl RfInputConfig {
    pub fn image_hw(&self) -> (usize, usize) {
        (self.image_h, self.image_w)
    }
}

fn resample_row(x: &[f64], len: usize) -> Result<Vec<f64>, NnError> {
    let m = Matrix::from_vec(1, x.len(), x.to_vec());
    Ok(area_pool(&m, 1, len)?.into_data())
}

fn zscore(x: &[f64]) -> Result<Vec<f64>, NnError> {
    Ok(signal::normalize_slice(x, NormalizationMethod::ZScore)?)
}

/// `[len, 2]` sequence: the area-averaged z-scored signal and its FFT
/// magnitude (bins up to `fft_max_hz`) stretched to the same length.
pub fn rf_sequence(ts: &TimeSeries, cfg: &RfInputConfig) -> Result<Tensor, NnError> {
    let time = zscore(&resample_row(ts.samples(), cfg.signal_len)?)?;
    let mag = transform::fft_magnitude(ts)?;
    let bin_hz = ts.sample_rate() / ts.len() as f64;
    let keep = ((cfg.fft_max_hz / bin_hz).floor() as usize + 1).clamp(2, mag.len());
    let spec = zscore(&resample_row(&mag[..keep], cfg.signal_len)?)?;
    let mut data = Vec::with_capacity(2 * cfg.signal_len);
    for (a, b) in time.iter().zip(&spec) {
        data.push(*a);
        data.push(*b);
    }
    Ok(Tensor::new(vec![cfg.signal_len, 2], data))
}

/// Min-max scaled Morlet scaleogram, `[1, h, w]`.
pub fn scaleogram_image(
    ts: &TimeSeries,
    n_scales: usize,
    f_min: f64,
    f_max: f64,
    hw: (usize, usize),
) -> Result<Tensor, NnError> {
    let sg = transform::cwt_morlet(ts, n_scales, f_min, f_max)?;
    let img = transform::scaleogram_resize(&sg, hw.0, hw.1)?;
    Ok(Tensor::new(vec![1, hw.0, hw.1], img.into_data()))
}

/// Both inputs of the RF network for a preprocessed phase record.
pub fn rf_network_input(ts: &TimeSeries, cfg: &RfInputConfig) -> Result<Vec<Tensor>, NnError> {
    Ok(vec![
        rf_sequence(ts, cfg)?,
        scaleogram_image(ts, cfg.n_scales, cfg.f_min, cfg.f_max, cfg.image_hw())?,
    ])
}

/// Scaleogram geometry of the ECG network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcgInputConfig {
    pub image_h: usize,
    pub image_w: usize,
    pub n_scales: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Number of mRmR-selected IBI features fed beside the image.
    pub n_features: usize,
}

impl Default for EcgInputConfig {
    fn default() -> Self {
        Self {
            image_h: 16,
            image_w: 16,
            n_scales: 64,
            f_min: 0.5,
            f_max: 40.0,
            n_features: 30,
        }
    }
}

impl EcgInputConfig {
    pub fn image_hw(&self) -> (usize, usize) {
        (self.image_h, self.image_w)
    }
}

pub fn ecg_image_input(ts: &TimeSeries, cfg: &EcgInputConfig) -> Result<Tensor, NnError> {
    scaleogram_image(ts, cfg.n_scales, cfg.f_min, cfg.f_max, cfg.image_hw())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    /// Window centre, seconds from the recording start.
    pub time: f64,
    pub probs: Vec<f64>,
}

/// Sliding-window inference. Every window is preprocessed like a training
/// record (with the crop set to the window length) and run through the RF
/// network.
pub fn predict_over_time(
    model: &Model,
    recording: &TimeSeries,
    window_s: f64,
    hop_s: f64,
    pre: &RfPreprocess,
    cfg: &RfInputConfig,
) -> Result<Vec<TimePoint>, NnError> {
    let fs = recording.sample_rate();
    let duration = recording.len() as f64 / fs;
    if !(window_s > 0.0 && window_s <= duration + 1e-9) {
        return Err(NnError::Config(format!(
            "window {window_s} s must be positive and no longer than the {duration} s recording"
        )));
    }
    if !(hop_s > 0.0) {
        return Err(NnError::Config("hop must be positive".into()));
    }
    let win = ((window_s * fs).round() as usize).min(recording.len());
    let hop = ((hop_s * fs).round() as usize).max(1);
    let pre = RfPreprocess {
        crop_seconds: win as f64 / fs,
        ..pre.clone()
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= recording.len() {
        let seg = TimeSeries::with_start(
            recording.samples()[start..start + win].to_vec(),
            fs,
            recording.time_of(start),
        )?;
        let ts = pre.apply(&seg)?;
        let probs = model.forward(&rf_network_input(&ts, cfg)?)?;
        out.push(TimePoint {
            time: recording.time_of(start) - recording.start_time() + 0.5 * win as f64 / fs,
            probs,
        });
        start += hop;
    }
    Ok(out)
}
