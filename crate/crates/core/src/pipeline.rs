//! Preprocessing recipes and the per-fold feature learner used by LOOCV.

use serde::{Deserialize, Serialize};

use crate::classic::{self, ClassifierSpec};
use crate::dataset::{Emotion, LabeledDataset, Sample};
use crate::eval::{EvalSet, Pipeline};
use crate::features::{self, FeatureError, FeatureVector};
use crate::matrix::Matrix;
use crate::signal::{self, BandpassDesign, NormalizationMethod, SignalError, TimeSeries};

/// RF phase preprocessing: zero-phase bandpass, keep the final window,
/// remove the linear trend, z-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfPreprocess {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub crop_seconds: f64,
}

impl Default for RfPreprocess {
    fn default() -> Self {
        Self {
            low_hz: 0.1,
            high_hz: 8.0,
            order: 4,
            crop_seconds: 120.0,
        }
    }
}

impl RfPreprocess {
    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries, SignalError> {
        let design = BandpassDesign::new(self.low_hz, self.high_hz, self.order, ts.sample_rate())?;
        let filtered = ts.map_samples(design.filtfilt(ts.samples()))?;
        let cropped = signal::crop_tail(&filtered, self.crop_seconds)?;
        let flat = signal::detrend(&cropped)?;
        signal::normalize(&flat, NormalizationMethod::ZScore)
    }
}

/// ECG preprocessing: resample, zero-phase bandpass, keep the final window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcgPreprocess {
    pub sample_rate: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub crop_seconds: f64,
}

impl Default for EcgPreprocess {
    fn default() -> Self {
        Self {
            sample_rate: 154.0,
            low_hz: 0.5,
            high_hz: 45.0,
            order: 2,
            crop_seconds: 120.0,
        }
    }
}

impl EcgPreprocess {
    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries, SignalError> {
        let resampled = if (ts.sample_rate() - self.sample_rate).abs() > 1e-9 {
            signal::resample(ts, self.sample_rate)?
        } else {
            ts.clone()
        };
        let design = BandpassDesign::new(self.low_hz, self.high_hz, self.order, self.sample_rate)?;
        let filtered = resampled.map_samples(design.filtfilt(resampled.samples()))?;
        signal::crop_tail(&filtered, self.crop_seconds)
    }
}

pub fn rf_features(sample: &Sample, pre: &RfPreprocess) -> Result<FeatureVector, FeatureError> {
    let ts = pre.apply(&sample.rf)?;
    features::rf_feature_vector(&ts)
}

/// The 81 IBI features of a sample's ECG. Samples without ECG are an error.
pub fn ecg_features(sample: &Sample, pre: &EcgPreprocess) -> Result<FeatureVector, FeatureError> {
    let ecg = sample
        .ecg
        .as_ref()
        .ok_or_else(|| FeatureError::Table(format!("sample {} has no ECG", sample.id)))?;
    let ts = pre.apply(ecg)?;
    let ibi = features::detect_r_peaks(&ts)?;
    features::ibi_features(&ibi)
}

pub fn eval_set(dataset: &LabeledDataset) -> EvalSet {
    EvalSet {
        ids: dataset.samples.iter().map(|s| s.id.clone()).collect(),
        labels: dataset.labels(),
        subjects: dataset.subjects(),
        class_names: Emotion::ALL.iter().map(|e| e.name().to_string()).collect(),
    }
}

/// Per-column mean and standard deviation fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Columns with zero spread get unit scale.
    pub fn fit(x: &Matrix, rows: &[usize]) -> Self {
        let d = x.cols();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &r in rows {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for &r in rows {
            for ((s, v), m) in std.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Matrix, rows: &[usize]) -> Matrix {
        let data: Vec<Vec<f64>> = rows.iter().map(|&r| self.transform_row(x.row(r))).collect();
        Matrix::from_rows(&data)
    }
}

/// Scores indexed by training label, widened to `n_classes`. Classes the
/// model never saw get a score below every other entry.
pub fn widen_scores(scores: &[f64], class_labels: &[usize], n_classes: usize) -> Vec<f64> {
    let floor = scores.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0) - 1.0;
    let mut out = vec![floor; n_classes];
    for (s, &c) in scores.iter().zip(class_labels) {
        out[c] = *s;
    }
    out
}

/// Classical learner on a precomputed feature matrix. Each fold
/// standardizes on its training rows and optionally runs mRmR there.
pub struct FeaturePipeline<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub spec: ClassifierSpec,
    /// Number of mRmR-selected features; `None` keeps all.
    pub select: Option<usize>,
}

impl Pipeline for FeaturePipeline<'_> {
    fn name(&self) -> String {
        self.spec.kind.name().to_string()
    }

    fn fit_predict(&self, train: &[usize], test: &[usize], seed: u64) -> Result<Vec<Vec<f64>>, String> {
        let scaler = Standardizer::fit(self.features, train);
        let mut xtr = scaler.transform(self.features, train);
        let mut xte = scaler.transform(self.features, test);
        let ytr: Vec<usize> = train.iter().map(|&i| self.labels[i]).collect();
        if let Some(k) = self.select {
            let cols = features::mrmr_select(&xtr, &ytr, k.min(xtr.cols())).map_err(|e| e.to_string())?;
            xtr = xtr.select_cols(&cols);
            xte = xte.select_cols(&cols);
        }
        let spec = ClassifierSpec {
            seed,
            ..self.spec.clone()
        };
        let model = classic::fit(&spec, &xtr, &ytr).map_err(|e| e.to_string())?;
        (0..xte.rows())
            .map(|r| {
                model
                    .predict_scores(xte.row(r))
                    .map(|s| widen_scores(&s, &model.class_labels, self.n_classes))
                    .map_err(|e| e.to_string())
            })
            .collect()
    }
}
