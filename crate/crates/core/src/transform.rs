//! Spectral transforms: one-sided FFT magnitude, rectangular-window
//! periodogram, complex Morlet CWT scaleograms and area-average resizing of
//! scaleograms to a fixed network input shape.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::signal::TimeSeries;

/// Morlet centre frequency parameter.
pub const MORLET_OMEGA0: f64 = 6.0;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("CWT band must satisfy 0 < f_min < f_max <= Nyquist ({nyquist} Hz); got [{f_min}, {f_max}]")]
    Band { f_min: f64, f_max: f64, nyquist: f64 },
    #[error("need at least 2 scales, got {0}")]
    TooFewScales(usize),
    #[error("target dimensions must be >= 1")]
    EmptyTarget,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// One-sided magnitude spectrum `|X_k|`, `k = 0..=N/2`.
///
/// Backed by `rustfft`, which handles arbitrary lengths (mixed radix plus
/// Bluestein for large prime factors).
pub fn fft_magnitude(ts: &TimeSeries) -> Result<Vec<f64>, TransformError> {
    fft_magnitude_slice(ts.samples())
}

pub fn fft_magnitude_slice(x: &[f64]) -> Result<Vec<f64>, TransformError> {
    if x.len() < 2 {
        return Err(TransformError::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    let spec = spectrum(x);
    Ok(spec[..=x.len() / 2].iter().map(|c| c.norm()).collect())
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    /// Hz, ascending from 0.
    pub frequencies: Vec<f64>,
    /// Signal units squared per Hz.
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    /// Bin spacing in Hz.
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// `sum(P) * df`, which equals `mean(x^2)` for the periodogram.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution()
    }
}

/// Rectangular-window periodogram `P_k = |X_k|^2 / (fs N)` with interior
/// bins doubled. Detrend first if the DC bin should not dominate.
pub fn periodogram(ts: &TimeSeries) -> PowerSpectrum {
    periodogram_slice(ts.samples(), ts.sample_rate())
}

pub fn periodogram_slice(x: &[f64], fs: f64) -> PowerSpectrum {
    let n = x.len();
    if n < 2 {
        let power = x.iter().map(|v| v * v / fs).collect();
        return PowerSpectrum {
            frequencies: vec![0.0; x.len()],
            power,
        };
    }
    let spec = spectrum(x);
    let half = n / 2;
    let scale = 1.0 / (fs * n as f64);
    let power = (0..=half)
        .map(|k| {
            let p = spec[k].norm_sqr() * scale;
            let nyquist_bin = n.is_multiple_of(2) && k == half;
            if k == 0 || nyquist_bin {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let frequencies = (0..=half).map(|k| k as f64 * fs / n as f64).collect();
    PowerSpectrum { frequencies, power }
}

/// CWT magnitude map, rows ordered by ascending scale (descending
/// pseudo-frequency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaleogram {
    /// `n_scales x n_times`, non-negative.
    pub magnitudes: Matrix,
    /// Seconds, ascending.
    pub scales: Vec<f64>,
    pub sample_rate: f64,
}

impl Scaleogram {
    /// `omega0 / (2 pi s)` for each row.
    pub fn pseudo_frequencies(&self) -> Vec<f64> {
        self.scales.iter().map(|s| MORLET_OMEGA0 / (2.0 * PI * s)).collect()
    }

    /// CSV of the scale axis: `row,scale_s,frequency_hz`.
    pub fn write_scale_csv<W: Write>(&self, mut w: W) -> Result<(), TransformError> {
        writeln!(w, "row,scale_s,frequency_hz")?;
        for (i, (s, f)) in self.scales.iter().zip(self.pseudo_frequencies()).enumerate() {
            writeln!(w, "{i},{s},{f}")?;
        }
        Ok(())
    }
}

/// Scales whose pseudo-frequencies are log-spaced over `[f_min, f_max]`.
pub fn morlet_scales(n_scales: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let ratio = (f_min / f_max).ln();
    (0..n_scales)
        .map(|j| {
            let f = f_max * (ratio * j as f64 / (n_scales - 1) as f64).exp();
            MORLET_OMEGA0 / (2.0 * PI * f)
        })
        .collect()
}

/// Complex Morlet CWT magnitudes computed per scale by FFT convolution.
///
/// The wavelet is normalized to unit energy at every scale. The signal is
/// zero padded to at least twice its length, so values within roughly
/// `sqrt(2) * s` of either edge (the cone of influence) are attenuated.
pub fn cwt_morlet(ts: &TimeSeries, n_scales: usize, f_min: f64, f_max: f64) -> Result<Scaleogram, TransformError> {
    let nyquist = ts.sample_rate() / 2.0;
    if !(f_min > 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(TransformError::Band { f_min, f_max, nyquist });
    }
    if n_scales < 2 {
        return Err(TransformError::TooFewScales(n_scales));
    }
    let n = ts.len();
    if n < 2 {
        return Err(TransformError::TooShort { needed: 2, got: n });
    }
    let dt = 1.0 / ts.sample_rate();
    let m = (2 * n).next_power_of_two();
    let mut padded = ts.samples().to_vec();
    padded.resize(m, 0.0);
    let x_hat = spectrum(&padded);

    let omegas: Vec<f64> = (0..m)
        .map(|k| {
            let k = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            2.0 * PI * k / (m as f64 * dt)
        })
        .collect();

    let scales = morlet_scales(n_scales, f_min, f_max);
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m);
    let mut magnitudes = Matrix::zeros(n_scales, n);
    let quarter_pi = PI.powf(-0.25);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (row, &s) in scales.iter().enumerate() {
        let norm = (2.0 * PI * s / dt).sqrt() * quarter_pi / m as f64;
        for ((b, xh), &w) in buf.iter_mut().zip(&x_hat).zip(&omegas) {
            *b = if w > 0.0 {
                let d = s * w - MORLET_OMEGA0;
                xh * (norm * (-0.5 * d * d).exp())
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        ifft.process(&mut buf);
        for (dst, c) in magnitudes.row_mut(row).iter_mut().zip(&buf[..n]) {
            *dst = c.norm();
        }
    }
    Ok(Scaleogram {
        magnitudes,
        scales,
        sample_rate: ts.sample_rate(),
    })
}

/// Overlap weights mapping `from` cells onto `to` equal-width cells; each
/// target row of weights sums to one.
fn pooling_weights(from: usize, to: usize) -> Vec<Vec<(usize, f64)>> {
    let width = from as f64 / to as f64;
    (0..to)
        .map(|i| {
            let lo = i as f64 * width;
            let hi = lo + width;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(from);
            (first..last)
                .filter_map(|r| {
                    let overlap = (hi.min(r as f64 + 1.0) - lo.max(r as f64)).max(0.0);
                    (overlap > 0.0).then_some((r, overlap / width))
                })
                .collect()
        })
        .collect()
}

/// Area-average resampling to `height x width`. Each output cell is the
/// mean over its footprint, so `sum(out) * (H/h) * (W/w) == sum(input)`.
pub fn area_pool(m: &Matrix, height: usize, width: usize) -> Result<Matrix, TransformError> {
    if height == 0 || width == 0 || m.rows() == 0 || m.cols() == 0 {
        return Err(TransformError::EmptyTarget);
    }
    let rw = pooling_weights(m.rows(), height);
    let cw = pooling_weights(m.cols(), width);
    let mut tmp = Matrix::zeros(height, m.cols());
    for (i, weights) in rw.iter().enumerate() {
        let dst = tmp.row_mut(i);
        for &(r, w) in weights {
            for (d, v) in dst.iter_mut().zip(m.row(r)) {
                *d += w * v;
            }
        }
    }
    let mut out = Matrix::zeros(height, width);
    for i in 0..height {
        let src = tmp.row(i).to_vec();
        for (j, weights) in cw.iter().enumerate() {
            let v: f64 = weights.iter().map(|&(c, w)| w * src[c]).sum();
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Min-max scaling onto [0, 1]; a constant matrix maps to zeros.
pub fn minmax_matrix(m: &Matrix) -> Matrix {
    let lo = m.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let data = m
        .data()
        .iter()
        .map(|v| if range > 0.0 { (v - lo) / range } else { 0.0 })
        .collect();
    Matrix::from_vec(m.rows(), m.cols(), data)
}

/// Fixed-size network input: area pooling followed by min-max scaling.
pub fn scaleogram_resize(sg: &Scaleogram, height: usize, width: usize) -> Result<Matrix, TransformError> {
    Ok(minmax_matrix(&area_pool(&sg.magnitudes, height, width)?))
}

/// Binary 16-bit PGM (P5, maxval 65535), row 0 at the top. Values are
/// scaled by the matrix maximum.
pub fn write_pgm<W: Write>(m: &Matrix, mut w: W) -> Result<(), TransformError> {
    let hi = m.data().iter().copied().fold(0.0_f64, f64::max);
    write!(w, "P5\n{} {}\n65535\n", m.cols(), m.rows())?;
    let mut bytes = Vec::with_capacity(2 * m.data().len());
    for &v in m.data() {
        let q = if hi > 0.0 {
            (v.max(0.0) / hi * 65535.0).round() as u16
        } else {
            0
        };
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}
