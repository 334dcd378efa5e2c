//! Feature extraction.
//!
//! * The 7-entry RF vector: permutation entropy, three PSD band powers,
//!   variance, skewness and kurtosis.
//! * Pan-Tompkins style R-peak detection producing an [`IbiSeries`].
//! * An 81-entry inter-beat-interval feature registry.
//! * Greedy mRmR (MID criterion) feature selection.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Emotion;
use crate::matrix::Matrix;
use crate::signal::{self, BandpassDesign, SignalError, TimeSeries};
use crate::transform::{periodogram, periodogram_slice, PowerSpectrum};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("series too short: need more than {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("permutation entropy order {0} outside [2, 7]")]
    Order(usize),
    #[error("delay must be >= 1")]
    Delay,
    #[error("band [{lo}, {hi}] Hz is empty")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("constant series: skewness and kurtosis are undefined")]
    ConstantSeries,
    #[error("only {found} beats detected; need at least 2")]
    NoBeats { found: usize },
    #[error("inter-beat interval {value} s at index {index} outside (0.2, 3.0) s")]
    InvalidInterval { index: usize, value: f64 },
    #[error("need at least {needed} RR intervals, got {got}")]
    TooFewIntervals { needed: usize, got: usize },
    #[error("cannot select {k} of {available} features")]
    TooManyFeatures { k: usize, available: usize },
    #[error("feature selection needs at least two classes")]
    SingleClass,
    #[error("feature matrix has {rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("malformed feature table: {0}")]
    Table(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Values paired with the names of a fixed registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

impl FeatureVector {
    fn from_registry(values: Vec<f64>, names: &[&str]) -> Self {
        debug_assert_eq!(values.len(), names.len());
        Self {
            values,
            names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

// ---------------------------------------------------------------------------
// Complexity and spectral features

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Normalized permutation entropy in [0, 1].
///
/// Ordinal patterns are obtained by a stable argsort, so equal values are
/// ranked in order of appearance.
pub fn permutation_entropy(x: &[f64], order: usize, delay: usize) -> Result<f64, FeatureError> {
    if !(2..=7).contains(&order) {
        return Err(FeatureError::Order(order));
    }
    if delay == 0 {
        return Err(FeatureError::Delay);
    }
    let span = (order - 1) * delay;
    if x.len() <= span + 1 {
        return Err(FeatureError::TooShort {
            needed: span + 1,
            got: x.len(),
        });
    }
    let windows = x.len() - span;
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut idx: Vec<usize> = Vec::with_capacity(order);
    for start in 0..windows {
        idx.clear();
        idx.extend(0..order);
        idx.sort_by(|&a, &b| x[start + a * delay].total_cmp(&x[start + b * delay]));
        let code = idx.iter().fold(0u32, |acc, &i| acc * order as u32 + i as u32);
        *counts.entry(code).or_default() += 1;
    }
    let total = windows as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    Ok((h / factorial(order).ln()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPower {
    pub power: f64,
    /// Set when the band lies entirely outside the spectrum's support.
    pub out_of_support: bool,
}

/// Integral of the piecewise-linear PSD over `[lo, hi]` (trapezoidal rule,
/// edge bins weighted by their fractional overlap).
pub fn band_power(ps: &PowerSpectrum, lo: f64, hi: f64) -> Result<BandPower, FeatureError> {
    if !(lo < hi) {
        return Err(FeatureError::EmptyBand { lo, hi });
    }
    let f = &ps.frequencies;
    let p = &ps.power;
    let (Some(&f_first), Some(&f_last)) = (f.first(), f.last()) else {
        return Ok(BandPower {
            power: 0.0,
            out_of_support: true,
        });
    };
    if hi <= f_first || lo >= f_last {
        return Ok(BandPower {
            power: 0.0,
            out_of_support: true,
        });
    }
    let mut total = 0.0;
    for k in 0..f.len() - 1 {
        let (f0, f1) = (f[k], f[k + 1]);
        let a = lo.max(f0);
        let b = hi.min(f1);
        if b <= a {
            continue;
        }
        let slope = (p[k + 1] - p[k]) / (f1 - f0);
        let pa = p[k] + slope * (a - f0);
        let pb = p[k] + slope * (b - f0);
        total += 0.5 * (pa + pb) * (b - a);
    }
    Ok(BandPower {
        power: total,
        out_of_support: false,
    })
}

/// Population variance with non-excess skewness and kurtosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Population variance `m2`.
pub fn variance(x: &[f64]) -> f64 {
    let m = signal::mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// `m2`, `m3 / m2^1.5` and `m4 / m2^2` (kurtosis of a Gaussian is 3).
pub fn moments(x: &[f64]) -> Result<Moments, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::TooShort {
            needed: 1,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let m = signal::mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 0.0) {
        return Err(FeatureError::ConstantSeries);
    }
    Ok(Moments {
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

pub const RF_FEATURE_NAMES: [&str; 7] = [
    "perm_entropy",
    "psd_0.15_2hz",
    "psd_2_4hz",
    "psd_4_8hz",
    "variance",
    "skewness",
    "kurtosis",
];

/// PSD bands of the RF feature vector, Hz.
pub const RF_BANDS: [(f64, f64); 3] = [(0.15, 2.0), (2.0, 4.0), (4.0, 8.0)];

/// The 7-entry RF feature vector of a preprocessed phase record.
pub fn rf_feature_vector(ts: &TimeSeries) -> Result<FeatureVector, FeatureError> {
    let x = ts.samples();
    let pe = permutation_entropy(x, 3, 1)?;
    let ps = periodogram(ts);
    let mut values = vec![pe];
    for (lo, hi) in RF_BANDS {
        values.push(band_power(&ps, lo, hi)?.power);
    }
    let m = moments(x)?;
    values.extend([m.variance, m.skewness, m.kurtosis]);
    Ok(FeatureVector::from_registry(values, &RF_FEATURE_NAMES))
}

// ---------------------------------------------------------------------------
// R-peak detection

/// Beat times and the intervals between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbiSeries {
    /// Seconds, each in (0.2, 3.0).
    pub rr_intervals: Vec<f64>,
    /// Seconds, ascending.
    pub beat_times: Vec<f64>,
}

impl IbiSeries {
    pub fn from_beat_times(beat_times: Vec<f64>) -> Result<Self, FeatureError> {
        if beat_times.len() < 2 {
            return Err(FeatureError::NoBeats {
                found: beat_times.len(),
            });
        }
        let rr: Vec<f64> = beat_times.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some((index, &value)) = rr.iter().enumerate().find(|(_, v)| !(**v > 0.2 && **v < 3.0)) {
            return Err(FeatureError::InvalidInterval { index, value });
        }
        Ok(Self {
            rr_intervals: rr,
            beat_times,
        })
    }

    pub fn len(&self) -> usize {
        self.rr_intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rr_intervals.is_empty()
    }
}

fn centered_moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let half = width / 2;
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(n);
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect()
}

/// Pan-Tompkins style QRS detector.
///
/// 5-15 Hz zero-phase bandpass, five-point derivative, squaring, 150 ms
/// moving-window integration, adaptive signal/noise peak thresholds with a
/// 200 ms refractory period and search-back over missed beats. Each
/// detection is refined to the maximum of the input ECG (with parabolic
/// sub-sample interpolation).
pub fn detect_r_peaks(ecg: &TimeSeries) -> Result<IbiSeries, FeatureError> {
    let fs = ecg.sample_rate();
    let x = ecg.samples();
    let n = x.len();
    if n < (fs * 0.5) as usize {
        return Err(FeatureError::NoBeats { found: 0 });
    }
    let design = BandpassDesign::new(5.0, 15.0, 2, fs)?;
    let bp = design.filtfilt(x);

    let mut deriv = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        deriv[i] = (-bp[i - 2] - 2.0 * bp[i - 1] + 2.0 * bp[i + 1] + bp[i + 2]) * fs / 8.0;
    }
    let squared: Vec<f64> = deriv.iter().map(|v| v * v).collect();
    let win = ((0.150 * fs).round() as usize).max(1);
    let mwi = centered_moving_average(&squared, win);

    let refractory = (0.200 * fs).round() as usize;
    // local maxima, thinned so that candidates are at least one refractory apart
    let mut cands: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if mwi[i] > 0.0 && mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1] {
            match cands.last() {
                Some(&last) if i - last < refractory => {
                    if mwi[i] > mwi[last] {
                        *cands.last_mut().unwrap() = i;
                    }
                }
                _ => cands.push(i),
            }
        }
    }

    let learn = ((2.0 * fs) as usize).min(n);
    let mut spki = 0.25 * mwi[..learn].iter().cloned().fold(0.0, f64::max);
    let mut npki = 0.5 * signal::mean(&mwi[..learn]);
    let threshold = |s: f64, nz: f64| nz + 0.25 * (s - nz);

    let mut qrs: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    for &c in &cands {
        let peak = mwi[c];
        let thr = threshold(spki, npki);
        let after_refractory = qrs.last().is_none_or(|&q| c - q > refractory);
        if peak > thr && after_refractory {
            qrs.push(c);
            spki = 0.125 * peak + 0.875 * spki;
            pending.clear();
        } else {
            npki = 0.125 * peak + 0.875 * npki;
            pending.push(c);
        }

        // search back when the gap since the last beat is unusually long
        if qrs.len() >= 2 {
            let recent = &qrs[qrs.len().saturating_sub(9)..];
            let mean_rr = (recent[recent.len() - 1] - recent[0]) as f64 / (recent.len() - 1) as f64;
            let last = *qrs.last().unwrap();
            if (c - last) as f64 > 1.66 * mean_rr {
                let half_thr = 0.5 * threshold(spki, npki);
                if let Some(&best) = pending
                    .iter()
                    .filter(|&&p| p > last + refractory && mwi[p] > half_thr)
                    .max_by(|&&a, &&b| mwi[a].total_cmp(&mwi[b]))
                {
                    spki = 0.25 * mwi[best] + 0.75 * spki;
                    qrs.push(best);
                    pending.retain(|&p| p > best);
                    if c > best + refractory && mwi[c] > half_thr && pending.contains(&c) {
                        qrs.push(c);
                        pending.clear();
                    }
                }
            }
        }
    }
    qrs.sort_unstable();
    qrs.dedup();

    let reach = win;
    let mut beats: Vec<f64> = Vec::with_capacity(qrs.len());
    for &q in &qrs {
        let lo = q.saturating_sub(reach);
        let hi = (q + reach + 1).min(n);
        let (mut best, mut best_v) = (lo, f64::NEG_INFINITY);
        for (i, &v) in x.iter().enumerate().take(hi).skip(lo) {
            if v > best_v {
                best = i;
                best_v = v;
            }
        }
        let mut t = best as f64;
        if best > 0 && best + 1 < n {
            let (a, b, c) = (x[best - 1], x[best], x[best + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                t += (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
        let time = ecg.start_time() + t / fs;
        if beats.last().is_none_or(|&prev| time - prev > 0.2) {
            beats.push(time);
        }
    }
    if beats.len() < 2 {
        return Err(FeatureError::NoBeats { found: beats.len() });
    }
    IbiSeries::from_beat_times(beats)
}

// ---------------------------------------------------------------------------
// IBI feature registry

const STAT_NAMES: [&str; 15] = [
    "mean", "median", "std", "min", "max", "range", "iqr", "mad", "rms", "skewness", "kurtosis", "p10", "p25", "p75",
    "p90",
];

const HRV_NAMES: [&str; 12] = [
    "sdnn",
    "rmssd",
    "sdsd",
    "pnn20",
    "pnn50",
    "nn50",
    "cv_rr",
    "hr_mean",
    "hr_std",
    "hr_min",
    "hr_max",
    "tri_index",
];

const POINCARE_NAMES: [&str; 3] = ["sd1", "sd2", "sd1_sd2"];

const SPECTRAL_NAMES: [&str; 7] = ["vlf", "lf", "hf", "lf_hf", "total_power", "lf_nu", "hf_nu"];

const COMPLEXITY_NAMES: [&str; 3] = ["pe3", "pe4", "sampen"];

/// Minimum number of RR intervals accepted by [`ibi_features`].
pub const MIN_IBI_INTERVALS: usize = 10;

/// Names of the 81 IBI features in registry order.
pub fn ibi_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(81);
    for series in ["rr", "drr", "ddrr"] {
        names.extend(STAT_NAMES.iter().map(|s| format!("{series}_{s}")));
    }
    names.extend(HRV_NAMES.iter().map(|s| s.to_string()));
    names.extend(POINCARE_NAMES.iter().map(|s| s.to_string()));
    names.extend(SPECTRAL_NAMES.iter().map(|s| s.to_string()));
    names.extend(COMPLEXITY_NAMES.iter().map(|s| s.to_string()));
    for third in 1..=3 {
        for stat in ["mean", "std", "slope"] {
            names.push(format!("seg{third}_{stat}"));
        }
    }
    names.push("seg_mean_range".into());
    names.push("seg_mean_std".into());
    names
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Linear-interpolated percentile, `p` in [0, 1], of sorted data.
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn population_std(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Least-squares slope against the element index.
fn slope(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let m = signal::mean(x);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - m);
        sxx += dt * dt;
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// The 15 summary statistics; skewness and kurtosis are 0 for a constant series.
fn summary_stats(x: &[f64]) -> [f64; 15] {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = percentile_sorted(&sorted, 0.5);
    let mut abs_dev: Vec<f64> = x.iter().map(|v| (v - median).abs()).collect();
    abs_dev.sort_by(f64::total_cmp);
    let (skew, kurt) = match moments(x) {
        Ok(m) => (m.skewness, m.kurtosis),
        Err(_) => (0.0, 0.0),
    };
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let p25 = percentile_sorted(&sorted, 0.25);
    let p75 = percentile_sorted(&sorted, 0.75);
    [
        signal::mean(x),
        median,
        signal::sample_std(x),
        min,
        max,
        max - min,
        p75 - p25,
        percentile_sorted(&abs_dev, 0.5),
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt(),
        skew,
        kurt,
        percentile_sorted(&sorted, 0.10),
        p25,
        p75,
        percentile_sorted(&sorted, 0.90),
    ]
}

/// Regularized sample entropy `ln((B + 1) / (A + 1))` with template length 2
/// and tolerance `0.2 * std`; finite for every input.
fn sample_entropy(x: &[f64]) -> f64 {
    let m = 2;
    let r = 0.2 * signal::sample_std(x);
    let n = x.len();
    if n <= m + 1 {
        return 0.0;
    }
    let templates = n - m;
    let (mut b, mut a) = (0usize, 0usize);
    for i in 0..templates {
        for j in i + 1..templates {
            let close = (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r);
            if close {
                b += 1;
                if i + m < n && j + m < n && (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    ((b as f64 + 1.0) / (a as f64 + 1.0)).ln()
}

/// Band powers of the 4 Hz interpolated tachogram:
/// VLF 0.003-0.04, LF 0.04-0.15, HF 0.15-0.4 Hz.
fn tachogram_bands(ibi: &IbiSeries) -> [f64; 7] {
    const RATE: f64 = 4.0;
    let times = &ibi.beat_times[1..];
    let rr = &ibi.rr_intervals;
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let n = (span * RATE).floor() as usize + 1;
    let mut grid = Vec::with_capacity(n);
    let mut k = 0;
    for j in 0..n {
        let t = t0 + j as f64 / RATE;
        while k + 2 < times.len() && times[k + 1] < t {
            k += 1;
        }
        let (ta, tb) = (times[k], times[(k + 1).min(times.len() - 1)]);
        let v = if tb > ta {
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            rr[k] + w * (rr[(k + 1).min(rr.len() - 1)] - rr[k])
        } else {
            rr[k]
        };
        grid.push(v);
    }
    let m = signal::mean(&grid);
    grid.iter_mut().for_each(|v| *v -= m);
    let ps = periodogram_slice(&grid, RATE);
    let bp = |lo: f64, hi: f64| band_power(&ps, lo, hi).map(|b| b.power).unwrap_or(0.0);
    let vlf = bp(0.003, 0.04);
    let lf = bp(0.04, 0.15);
    let hf = bp(0.15, 0.4);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    [
        vlf,
        lf,
        hf,
        ratio(lf, hf),
        vlf + lf + hf,
        ratio(lf, lf + hf),
        ratio(hf, lf + hf),
    ]
}

/// The 81-entry IBI feature vector; see [`ibi_feature_names`] for the order.
pub fn ibi_features(ibi: &IbiSeries) -> Result<FeatureVector, FeatureError> {
    let rr = &ibi.rr_intervals;
    if rr.len() < MIN_IBI_INTERVALS {
        return Err(FeatureError::TooFewIntervals {
            needed: MIN_IBI_INTERVALS,
            got: rr.len(),
        });
    }
    let drr = diff(rr);
    let ddrr = diff(&drr);
    let mut v = Vec::with_capacity(81);
    for series in [rr.as_slice(), &drr, &ddrr] {
        v.extend(summary_stats(series));
    }

    // time domain
    let mean_rr = signal::mean(rr);
    let sdnn = signal::sample_std(rr);
    let rmssd = (drr.iter().map(|d| d * d).sum::<f64>() / drr.len() as f64).sqrt();
    let sdsd = signal::sample_std(&drr);
    let frac_over = |limit: f64| drr.iter().filter(|d| d.abs() > limit).count();
    let nn50 = frac_over(0.05);
    let hr: Vec<f64> = rr.iter().map(|r| 60.0 / r).collect();
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
    for r in rr {
        *hist.entry((r * 128.0).floor() as i64).or_default() += 1;
    }
    let peak_bin = hist.values().copied().max().unwrap_or(1);
    v.extend([
        sdnn,
        rmssd,
        sdsd,
        frac_over(0.02) as f64 / drr.len() as f64,
        nn50 as f64 / drr.len() as f64,
        nn50 as f64,
        sdnn / mean_rr,
        signal::mean(&hr),
        signal::sample_std(&hr),
        hr.iter().cloned().fold(f64::INFINITY, f64::min),
        hr.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        rr.len() as f64 / peak_bin as f64,
    ]);

    // Poincare: spread across and along the identity line
    let across: Vec<f64> = rr
        .windows(2)
        .map(|w| (w[1] - w[0]) / std::f64::consts::SQRT_2)
        .collect();
    let along: Vec<f64> = rr
        .windows(2)
        .map(|w| (w[1] + w[0]) / std::f64::consts::SQRT_2)
        .collect();
    let sd1 = population_std(&across);
    let sd2 = population_std(&along);
    v.extend([sd1, sd2, if sd2 > 0.0 { sd1 / sd2 } else { 0.0 }]);

    v.extend(tachogram_bands(ibi));

    v.extend([
        permutation_entropy(rr, 3, 1)?,
        permutation_entropy(rr, 4, 1)?,
        sample_entropy(rr),
    ]);

    let n = rr.len();
    let mut seg_means = [0.0; 3];
    for (k, seg_mean) in seg_means.iter_mut().enumerate() {
        let seg = &rr[k * n / 3..(k + 1) * n / 3];
        *seg_mean = signal::mean(seg);
        v.extend([*seg_mean, signal::sample_std(seg), slope(seg)]);
    }
    let lo = seg_means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = seg_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.extend([hi - lo, signal::sample_std(&seg_means)]);

    let names = ibi_feature_names();
    debug_assert_eq!(v.len(), names.len());
    Ok(FeatureVector { values: v, names })
}

// ---------------------------------------------------------------------------
// mRmR

/// Number of equal-frequency bins used for mutual information estimates.
pub const MI_BINS: usize = 8;

/// Equal-frequency discretization: bin = floor(rank * bins / n), ranks from
/// a stable sort, so every bin receives the same number of samples (up to
/// rounding) even when values repeat.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * bins / n;
    }
    out
}

/// Plug-in mutual information (nats) between two discrete sequences.
pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let na = a.iter().max().map_or(0, |m| m + 1);
    let nb = b.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; na * nb];
    let mut pa = vec![0usize; na];
    let mut pb = vec![0usize; nb];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * nb + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let c = joint[i * nb + j];
            if c > 0 {
                let pij = c as f64 / n;
                mi += pij * (pij * n * n / (pa[i] as f64 * pb[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Greedy mRmR with the MID criterion.
///
/// First pick maximizes `I(f; y)`; each further pick maximizes
/// `I(f; y) - mean_{s in S} I(f; f_s)`. Ties go to the lowest index.
/// Returns `k` column indices in selection order.
pub fn mrmr_select(x: &Matrix, labels: &[usize], k: usize) -> Result<Vec<usize>, FeatureError> {
    let d = x.cols();
    if k > d {
        return Err(FeatureError::TooManyFeatures { k, available: d });
    }
    if labels.len() != x.rows() {
        return Err(FeatureError::LabelCount {
            rows: x.rows(),
            labels: labels.len(),
        });
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(FeatureError::SingleClass);
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    let binned: Vec<Vec<usize>> = (0..d).map(|c| equal_frequency_bins(&x.column(c), MI_BINS)).collect();
    let relevance: Vec<f64> = binned.iter().map(|b| mutual_information(b, &y)).collect();

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut redundancy = vec![0.0; d];
    let mut chosen = vec![false; d];
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for f in 0..d {
            if chosen[f] {
                continue;
            }
            let score = if selected.is_empty() {
                relevance[f]
            } else {
                relevance[f] - redundancy[f] / selected.len() as f64
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((f, score));
            }
        }
        let (f, _) = best.expect("k <= d leaves a candidate");
        chosen[f] = true;
        selected.push(f);
        for g in 0..d {
            if !chosen[g] {
                redundancy[g] += mutual_information(&binned[g], &binned[f]);
            }
        }
    }
    Ok(selected)
}

// ---------------------------------------------------------------------------
// Feature table interchange

/// Feature matrix with one row per sample and a trailing `label` column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub values: Matrix,
    pub labels: Vec<Emotion>,
}

impl FeatureTable {
    pub fn from_vectors(vectors: &[FeatureVector], labels: Vec<Emotion>) -> Result<Self, FeatureError> {
        let Some(first) = vectors.first() else {
            return Err(FeatureError::Table("no feature vectors".into()));
        };
        if vectors.len() != labels.len() {
            return Err(FeatureError::LabelCount {
                rows: vectors.len(),
                labels: labels.len(),
            });
        }
        let rows: Vec<Vec<f64>> = vectors
            .iter()
            .map(|v| {
                if v.names != first.names {
                    Err(FeatureError::Table("inconsistent feature registries".into()))
                } else {
                    Ok(v.values.clone())
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            names: first.names.clone(),
            values: Matrix::from_rows(&rows),
            labels,
        })
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.class_id()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = self.names.clone();
        header.push("label".into());
        wtr.write_record(&header)?;
        for (r, label) in self.labels.iter().enumerate() {
            let mut rec: Vec<String> = self.values.row(r).iter().map(|v| v.to_string()).collect();
            rec.push(label.name().to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, FeatureError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.last().map(String::as_str) != Some("label") {
            return Err(FeatureError::Table("last column must be 'label'".into()));
        }
        let names = header[..header.len() - 1].to_vec();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(FeatureError::Table(format!("row {i} has {} fields", rec.len())));
            }
            let vals = rec
                .iter()
                .take(names.len())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| FeatureError::Table(format!("row {i}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(vals);
            labels.push(rec[names.len()].parse::<Emotion>().map_err(FeatureError::Table)?);
        }
        if rows.is_empty() {
            return Err(FeatureError::Table("no rows".into()));
        }
        Ok(Self {
            names,
            values: Matrix::from_rows(&rows),
            labels,
        })
    }
}
