//! Uniformly sampled time series and the preprocessing chain applied to RF
//! phase and ECG records: resampling, zero-phase Butterworth bandpass,
//! detrending, normalization and tail cropping.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("time series is empty")]
    Empty,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("band edges must satisfy 0 < low < high < fs/2 (low={low}, high={high}, fs={fs})")]
    BandEdges { low: f64, high: f64, fs: f64 },
    #[error("unsupported filter order {0}; expected one of 2, 4, 6, 8")]
    UnsupportedOrder(usize),
    #[error("constant signal: standard deviation is zero")]
    ConstantSignal,
    #[error("requested window of {requested} s exceeds signal duration {available} s")]
    WindowTooLong { requested: f64, available: f64 },
    #[error("non-uniform sampling at row {row}: step {step} vs {expected}")]
    NonUniform { row: usize, step: f64, expected: f64 },
    #[error("malformed CSV at row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A uniformly sampled, finite, non-empty real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate: f64,
    start_time: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self, SignalError> {
        Self::with_start(samples, sample_rate, 0.0)
    }

    pub fn with_start(samples: Vec<f64>, sample_rate: f64, start_time: f64) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::InvalidRate(sample_rate));
        }
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        Ok(Self {
            samples,
            sample_rate,
            start_time,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Record length in seconds (`len / sample_rate`).
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Time stamp of sample `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    /// Same rate and start time, new samples.
    pub fn map_samples(&self, samples: Vec<f64>) -> Result<Self, SignalError> {
        Self::with_start(samples, self.sample_rate, self.start_time)
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    /// Reads a `time,value` CSV. A non-numeric first row is treated as a
    /// header, so plain two-column exports are accepted as well.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SignalError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(SignalError::Parse {
                    row,
                    reason: format!("expected 2 columns, found {}", record.len()),
                });
            }
            let t = record[0].parse::<f64>();
            let v = record[1].parse::<f64>();
            match (t, v) {
                (Ok(t), Ok(v)) => {
                    times.push(t);
                    values.push(v);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(SignalError::Parse {
                        row,
                        reason: format!("non-numeric fields {:?}", record),
                    })
                }
            }
        }
        if times.len() < 2 {
            return Err(SignalError::TooShort {
                needed: 2,
                got: times.len(),
            });
        }
        let step = times[1] - times[0];
        if !(step > 0.0) {
            return Err(SignalError::NonUniform {
                row: 1,
                step,
                expected: step,
            });
        }
        for (i, w) in times.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if ((dt - step) / step).abs() > 1e-6 {
                return Err(SignalError::NonUniform {
                    row: i + 1,
                    step: dt,
                    expected: step,
                });
            }
        }
        Self::with_start(values, 1.0 / step, times[0])
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self, SignalError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SignalError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["time", "value"])?;
        for (i, v) in self.samples.iter().enumerate() {
            wtr.write_record([self.time_of(i).to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<(), SignalError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMethod {
    /// Zero mean, unit sample standard deviation (N-1 denominator).
    ZScore,
    /// Affine map onto [0, 1].
    MinMax,
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (N-1 denominator); 0 for fewer than 2 values.
pub(crate) fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

/// Linear-interpolation resampling onto a grid of `target_rate` starting at
/// the first input sample and ending at or before the last one.
pub fn resample(ts: &TimeSeries, target_rate: f64) -> Result<TimeSeries, SignalError> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(SignalError::InvalidRate(target_rate));
    }
    let n = ts.len();
    if n < 2 {
        return Err(SignalError::TooShort { needed: 2, got: n });
    }
    let x = ts.samples();
    let ratio = ts.sample_rate() / target_rate;
    let span = (n - 1) as f64 / ts.sample_rate();
    let n_out = (span * target_rate + 1e-9).floor() as usize + 1;
    let out = (0..n_out)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as usize;
            if i >= n - 1 {
                return x[n - 1];
            }
            let frac = pos - i as f64;
            if frac == 0.0 {
                x[i]
            } else {
                x[i] + frac * (x[i + 1] - x[i])
            }
        })
        .collect();
    TimeSeries::with_start(out, target_rate, ts.start_time())
}

/// One second-order section, `b` numerator and `a` denominator with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z1 * self.a[1] + z2 * self.a[2];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct-form II state for a constant input of 1.
    fn step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * y;
        let z1 = self.b[1] - self.a[1] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let (mut z1, mut z2) = (state[0], state[1]);
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Butterworth bandpass as a cascade of biquads.
///
/// `order` is the lowpass prototype order; the bandpass has `2 * order`
/// poles split over `order` sections, each normalized to unit gain at the
/// digital centre frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BandpassDesign {
    pub sections: Vec<Biquad>,
    pub low: f64,
    pub high: f64,
    pub sample_rate: f64,
    pub order: usize,
}

impl BandpassDesign {
    pub fn new(low: f64, high: f64, order: usize, sample_rate: f64) -> Result<Self, SignalError> {
        if !(low > 0.0 && low < high && high < sample_rate / 2.0) {
            return Err(SignalError::BandEdges {
                low,
                high,
                fs: sample_rate,
            });
        }
        if !matches!(order, 2 | 4 | 6 | 8) {
            return Err(SignalError::UnsupportedOrder(order));
        }
        let fs2 = 2.0 * sample_rate;
        let w1 = fs2 * (PI * low / sample_rate).tan();
        let w2 = fs2 * (PI * high / sample_rate).tan();
        let w0_sq = w1 * w2;
        let bw = w2 - w1;
        let centre = 2.0 * (w0_sq.sqrt() / fs2).atan();

        let n = order as f64;
        let mut sections = Vec::with_capacity(order);
        for k in 0..order {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            let proto = Complex64::from_polar(1.0, theta);
            let half = proto * (bw / 2.0);
            let root = (half * half - w0_sq).sqrt();
            for s in [half + root, half - root] {
                if s.im <= 0.0 {
                    continue;
                }
                let z = (fs2 + s) / (fs2 - s);
                let mut section = Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [1.0, -2.0 * z.re, z.norm_sqr()],
                };
                let gain = 1.0 / section.response(centre).norm();
                section.b.iter_mut().for_each(|c| *c *= gain);
                sections.push(section);
            }
        }
        debug_assert_eq!(sections.len(), order);
        Ok(Self {
            sections,
            low,
            high,
            sample_rate,
            order,
        })
    }

    /// Complex response of one pass of the cascade at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let omega = 2.0 * PI * freq / self.sample_rate;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    /// Causal single pass with zero initial state.
    pub fn filter(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x, [0.0, 0.0]);
        }
    }

    fn filter_steady(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let mut level = first;
        for s in &self.sections {
            let zi = s.step_state();
            s.run(x, [zi[0] * level, zi[1] * level]);
            level *= s.dc_gain();
        }
    }

    fn pad_len(&self, n: usize) -> usize {
        let base = 3 * (2 * self.sections.len() + 1);
        let settle = (3.0 * self.sample_rate / self.low).ceil() as usize;
        base.max(settle).min(n.saturating_sub(1))
    }

    /// Forward-backward application with odd-extension padding and
    /// steady-state initial conditions. Magnitude response is `|H|^2`,
    /// phase is zero.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len(n);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        self.filter_steady(&mut ext);
        ext.reverse();
        self.filter_steady(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth bandpass between `low` and `high` Hz.
pub fn butterworth_bandpass(ts: &TimeSeries, low: f64, high: f64, order: usize) -> Result<TimeSeries, SignalError> {
    let design = BandpassDesign::new(low, high, order, ts.sample_rate())?;
    ts.map_samples(design.filtfilt(ts.samples()))
}

pub fn normalize(ts: &TimeSeries, method: NormalizationMethod) -> Result<TimeSeries, SignalError> {
    ts.map_samples(normalize_slice(ts.samples(), method)?)
}

pub fn normalize_slice(x: &[f64], method: NormalizationMethod) -> Result<Vec<f64>, SignalError> {
    match method {
        NormalizationMethod::ZScore => {
            let m = mean(x);
            let sd = sample_std(x);
            if !(sd > 0.0) {
                return Err(SignalError::ConstantSignal);
            }
            Ok(x.iter().map(|v| (v - m) / sd).collect())
        }
        NormalizationMethod::MinMax => {
            let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            if !(range > 0.0) {
                return Err(SignalError::ConstantSignal);
            }
            Ok(x.iter().map(|v| (v - lo) / range).collect())
        }
    }
}

/// The final `seconds` of the record, `round(seconds * fs)` samples long.
pub fn crop_tail(ts: &TimeSeries, seconds: f64) -> Result<TimeSeries, SignalError> {
    let n = (seconds * ts.sample_rate()).round() as usize;
    if !(seconds > 0.0) || n == 0 || n > ts.len() {
        return Err(SignalError::WindowTooLong {
            requested: seconds,
            available: ts.duration(),
        });
    }
    let skip = ts.len() - n;
    TimeSeries::with_start(ts.samples()[skip..].to_vec(), ts.sample_rate(), ts.time_of(skip))
}

/// Subtracts the least-squares line fitted against the sample index.
pub fn detrend(ts: &TimeSeries) -> Result<TimeSeries, SignalError> {
    if ts.len() < 2 {
        return Err(SignalError::TooShort {
            needed: 2,
            got: ts.len(),
        });
    }
    ts.map_samples(detrend_slice(ts.samples()))
}

pub(crate) fn detrend_slice(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let t_mean = (n as f64 - 1.0) / 2.0;
    let x_mean = mean(x);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .enumerate()
        .map(|(i, v)| v - x_mean - slope * (i as f64 - t_mean))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[f64], fs: f64) -> TimeSeries {
        TimeSeries::new(v.to_vec(), fs).unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn sine(freq: f64, fs: f64, seconds: f64) -> Vec<f64> {
        let n = (fs * seconds).round() as usize;
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    /// Analytic prewarped Butterworth bandpass magnitude, one pass.
    fn analytic_gain(freq: f64, low: f64, high: f64, order: usize, fs: f64) -> f64 {
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let (w, w1, w2) = (warp(freq), warp(low), warp(high));
        let ratio = (w * w - w1 * w2) / (w * (w2 - w1));
        1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt()
    }

    #[test]
    fn rejects_invalid_series() {
        assert!(matches!(TimeSeries::new(vec![], 1.0), Err(SignalError::Empty)));
        assert!(matches!(
            TimeSeries::new(vec![1.0], 0.0),
            Err(SignalError::InvalidRate(_))
        ));
        assert!(matches!(
            TimeSeries::new(vec![1.0, f64::NAN], 1.0),
            Err(SignalError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn resample_linear_ramp() {
        let out = resample(&ts(&[0.0, 1.0, 2.0, 3.0], 1.0), 2.0).unwrap();
        assert_eq!(out.samples(), &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(out.sample_rate(), 2.0);
    }

    #[test]
    fn resample_constant_down() {
        let out = resample(&ts(&[5.0, 5.0, 5.0], 10.0), 5.0).unwrap();
        assert_eq!(out.samples(), &[5.0, 5.0]);
    }

    #[test]
    fn resample_sine_to_154() {
        let input = ts(&sine(1.0, 50.0, 4.0), 50.0);
        let out = resample(&input, 154.0).unwrap();
        let max_dev = out
            .samples()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - (2.0 * PI * i as f64 / 154.0).sin()).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 0.01, "max deviation {max_dev}");
        assert!((out.duration() - input.duration()).abs() <= 1.0 / 154.0 + 1.0 / 50.0);
    }

    #[test]
    fn resample_errors() {
        assert!(matches!(
            resample(&ts(&[1.0], 1.0), 2.0),
            Err(SignalError::TooShort { .. })
        ));
        assert!(matches!(
            resample(&ts(&[1.0, 2.0], 1.0), -1.0),
            Err(SignalError::InvalidRate(_))
        ));
    }

    #[test]
    fn bandpass_passband_rms() {
        let x = sine(20.0, 154.0, 10.0);
        let y = butterworth_bandpass(&ts(&x, 154.0), 0.5, 45.0, 4).unwrap();
        let oracle = analytic_gain(20.0, 0.5, 45.0, 4, 154.0).powi(2);
        let ratio = rms(y.samples()) / rms(&x);
        assert!((ratio - oracle).abs() < 0.05 * oracle, "ratio {ratio}");
    }

    #[test]
    fn bandpass_rejects_drift() {
        let fs = 154.0;
        let drift: Vec<f64> = sine(0.05, fs, 60.0).iter().map(|v| 5.0 * v).collect();
        let tone = sine(20.0, fs, 60.0);
        let mixed: Vec<f64> = drift.iter().zip(&tone).map(|(a, b)| a + b).collect();
        let out = butterworth_bandpass(&ts(&mixed, fs), 0.5, 45.0, 4).unwrap();
        let tone_out = butterworth_bandpass(&ts(&tone, fs), 0.5, 45.0, 4).unwrap();
        let residual: Vec<f64> = out
            .samples()
            .iter()
            .zip(tone_out.samples())
            .map(|(a, b)| a - b)
            .collect();
        let drift_db = 20.0 * (rms(&residual) / rms(&drift)).log10();
        assert!(drift_db < -20.0, "drift attenuation {drift_db} dB");
        let tone_db = 20.0 * (rms(tone_out.samples()) / rms(&tone)).log10();
        assert!(tone_db.abs() < 1.0, "tone change {tone_db} dB");
    }

    #[test]
    fn bandpass_of_zeros_is_zero() {
        let y = butterworth_bandpass(&ts(&[0.0; 300], 154.0), 0.5, 45.0, 4).unwrap();
        assert!(y.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bandpass_design_matches_analytic_response() {
        for order in [2, 4, 6, 8] {
            let d = BandpassDesign::new(0.5, 45.0, order, 154.0).unwrap();
            for f in [0.2, 0.5, 1.0, 5.0, 20.0, 45.0, 60.0] {
                let got = d.response(f).norm();
                let want = analytic_gain(f, 0.5, 45.0, order, 154.0);
                assert!((got - want).abs() < 1e-6, "order {order} f {f}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn bandpass_empirical_gain_on_probe_sines() {
        let fs = 154.0;
        for order in [2, 4, 6, 8] {
            for f in [2.0, 10.0, 30.0] {
                let x = sine(f, fs, 20.0);
                let y = butterworth_bandpass(&ts(&x, fs), 0.5, 45.0, order).unwrap();
                let n = x.len();
                let mid = n / 4..3 * n / 4;
                let gain = rms(&y.samples()[mid.clone()]) / rms(&x[mid]);
                let want = analytic_gain(f, 0.5, 45.0, order, fs).powi(2);
                assert!((gain - want).abs() < 0.05 * want, "order {order} f {f}");
            }
        }
    }

    #[test]
    fn bandpass_rejects_bad_parameters() {
        let x = ts(&[0.0; 32], 100.0);
        assert!(matches!(
            butterworth_bandpass(&x, 10.0, 5.0, 4),
            Err(SignalError::BandEdges { .. })
        ));
        assert!(matches!(
            butterworth_bandpass(&x, 1.0, 50.0, 4),
            Err(SignalError::BandEdges { .. })
        ));
        assert!(matches!(
            butterworth_bandpass(&x, 1.0, 10.0, 3),
            Err(SignalError::UnsupportedOrder(3))
        ));
    }

    #[test]
    fn minmax_and_zscore() {
        let mm = normalize(&ts(&[1.0, 2.0, 3.0], 1.0), NormalizationMethod::MinMax).unwrap();
        assert_eq!(mm.samples(), &[0.0, 0.5, 1.0]);
        let z = normalize(&ts(&[2.0, 4.0, 6.0], 1.0), NormalizationMethod::ZScore).unwrap();
        // sample std of [2,4,6] is 2
        assert_eq!(z.samples(), &[-1.0, 0.0, 1.0]);
        assert!(matches!(
            normalize(&ts(&[5.0, 5.0, 5.0], 1.0), NormalizationMethod::ZScore),
            Err(SignalError::ConstantSignal)
        ));
    }

    #[test]
    fn crop_tail_cases() {
        let record = ts(&vec![0.0; 1800], 10.0);
        assert_eq!(crop_tail(&record, 120.0).unwrap().len(), 1200);
        let ramp: Vec<f64> = (0..100).map(f64::from).collect();
        let r = ts(&ramp, 1.0);
        let tail = crop_tail(&r, 10.0).unwrap();
        assert_eq!(tail.samples(), &ramp[90..]);
        assert_eq!(tail.start_time(), 90.0);
        assert_eq!(crop_tail(&r, r.duration()).unwrap(), r);
        assert!(matches!(crop_tail(&r, 101.0), Err(SignalError::WindowTooLong { .. })));
    }

    #[test]
    fn detrend_cases() {
        let line = detrend(&ts(&[1.0, 2.0, 3.0, 4.0], 1.0)).unwrap();
        assert!(line.samples().iter().all(|v| v.abs() < 1e-12));
        let flat = detrend(&ts(&[3.5; 8], 1.0)).unwrap();
        assert!(flat.samples().iter().all(|v| v.abs() < 1e-12));

        // A whole number of periods has zero mean and no linear component.
        let n = 400;
        let s: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / 100.0).sin()).collect();
        let line_coef = {
            let t_mean = (n as f64 - 1.0) / 2.0;
            let sxy: f64 = s.iter().enumerate().map(|(i, v)| (i as f64 - t_mean) * v).sum();
            let sxx: f64 = (0..n).map(|i| (i as f64 - t_mean).powi(2)).sum();
            sxy / sxx
        };
        let mixed: Vec<f64> = s.iter().enumerate().map(|(i, v)| v + 0.3 * i as f64 - 2.0).collect();
        let out = detrend(&ts(&mixed, 1.0)).unwrap();
        let t_mean = (n as f64 - 1.0) / 2.0;
        let s_mean = mean(&s);
        for (i, v) in out.samples().iter().enumerate() {
            // oracle: the sine minus its own least-squares line
            let want = s[i] - s_mean - line_coef * (i as f64 - t_mean);
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let series = TimeSeries::with_start(vec![0.5, -1.25, 3.0], 4.0, 2.0).unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,value\n2,0.5\n2.25,-1.25\n"));
        let back = TimeSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, series);

        let bad = "time,value\n0,1\n0.1,2\n0.3,3\n";
        assert!(matches!(
            TimeSeries::read_csv(bad.as_bytes()),
            Err(SignalError::NonUniform { .. })
        ));
        let headerless = "0,1\n0.5,2\n1.0,3\n";
        let ts = TimeSeries::read_csv(headerless.as_bytes()).unwrap();
        assert_eq!(ts.sample_rate(), 2.0);
    }
}
