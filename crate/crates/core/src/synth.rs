//! Synthetic recordings: quasi-periodic chest motion, the radar phase it
//! produces, and a Gaussian-bump ECG, combined into a labeled dataset with
//! one recording per (subject, emotion).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Emotion, LabeledDataset, Sample};
use crate::seed;
use crate::signal::{SignalError, TimeSeries};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("at least one motion component is required")]
    NoComponents,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("motion amplitude {amplitude} m reaches the static distance {distance} m")]
    UnphysicalMotion { amplitude: f64, distance: f64 },
    #[error("emotion profile for '{0}' appears more than once")]
    DuplicateLabel(Emotion),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn invalid(name: &'static str, reason: impl Into<String>) -> SynthError {
    SynthError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// One sinusoidal term `A sin(2 pi f t + phi)` of body displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionComponent {
    /// Metres.
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// Radians.
    pub phase: f64,
}

impl MotionComponent {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid("amplitude", format!("{} must be >= 0", self.amplitude)));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(invalid("frequency", format!("{} must be > 0", self.frequency)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    /// Carrier frequency in Hz.
    pub carrier_frequency: f64,
    /// Antenna to body distance in metres.
    pub static_distance: f64,
    /// |Gamma_0| in (0, 1].
    pub reflection_magnitude: f64,
    /// Constant phase term in radians (C_0 and phi_0 folded together).
    pub phase_offset: f64,
    /// Receiver phase noise in radians, before division by |Gamma_0|.
    pub noise_std: f64,
    /// Phase record sampling rate in Hz.
    pub sample_rate: f64,
    /// Record length in seconds.
    pub duration: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 5.8e9,
            static_distance: 0.30,
            reflection_magnitude: 1.0,
            phase_offset: 0.0,
            noise_std: 0.01,
            sample_rate: 50.0,
            duration: 150.0,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.carrier_frequency > 0.0) {
            return Err(invalid("carrier_frequency", "must be > 0"));
        }
        if !(self.static_distance > 0.0) {
            return Err(invalid("static_distance", "must be > 0"));
        }
        if !(self.reflection_magnitude > 0.0 && self.reflection_magnitude <= 1.0) {
            return Err(invalid("reflection_magnitude", "must lie in (0, 1]"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(invalid("noise_std", "must be >= 0"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be > 0"));
        }
        if !(self.duration > 0.0) {
            return Err(invalid("duration", "must be > 0"));
        }
        Ok(())
    }

    /// Radians of phase per metre of displacement: `(2 / c) * 2 pi f_c`.
    pub fn phase_per_metre(&self) -> f64 {
        2.0 / SPEED_OF_LIGHT * 2.0 * PI * self.carrier_frequency
    }
}

/// Physiological signature used to synthesize recordings of one emotion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionProfile {
    pub label: Emotion,
    pub breathing: MotionComponent,
    pub heartbeat: MotionComponent,
    /// Per-cycle frequency jitter as a fraction of the nominal frequency.
    pub hr_variability: f64,
    /// White displacement noise in metres.
    pub motion_noise_std: f64,
    /// Transient posture shifts per minute.
    pub burst_rate: f64,
    /// Peak displacement of a posture shift in metres.
    pub burst_amplitude: f64,
}

impl EmotionProfile {
    pub fn heart_rate_bpm(&self) -> f64 {
        self.heartbeat.frequency * 60.0
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.breathing.validate()?;
        self.heartbeat.validate()?;
        if !(0.1..=0.5).contains(&self.breathing.frequency) {
            return Err(invalid("breathing.frequency", "must lie in [0.1, 0.5] Hz"));
        }
        if !(0.8..=3.0).contains(&self.heartbeat.frequency) {
            return Err(invalid("heartbeat.frequency", "must lie in [0.8, 3.0] Hz"));
        }
        if !(self.hr_variability >= 0.0 && self.hr_variability < 1.0) {
            return Err(invalid("hr_variability", "must lie in [0, 1)"));
        }
        if !(self.motion_noise_std >= 0.0) {
            return Err(invalid("motion_noise_std", "must be >= 0"));
        }
        if !(self.burst_rate >= 0.0 && self.burst_amplitude >= 0.0) {
            return Err(invalid("burst", "rate and amplitude must be >= 0"));
        }
        Ok(())
    }

    /// Default signatures: relax breathes slowly and deeply with a low heart
    /// rate; disgust slows the heart and adds posture shifts; joy raises
    /// breathing and heart rate; scary is fast, shallow and irregular.
    pub fn defaults() -> [EmotionProfile; 4] {
        let heart = |bpm: f64| MotionComponent::new(0.0005, bpm / 60.0, 0.0);
        [
            EmotionProfile {
                label: Emotion::Relax,
                breathing: MotionComponent::new(0.006, 0.20, 0.0),
                heartbeat: heart(65.0),
                hr_variability: 0.02,
                motion_noise_std: 0.00005,
                burst_rate: 0.0,
                burst_amplitude: 0.0,
            },
            EmotionProfile {
                label: Emotion::Scary,
                breathing: MotionComponent::new(0.004, 0.35, 0.0),
                heartbeat: heart(95.0),
                hr_variability: 0.12,
                motion_noise_std: 0.00015,
                burst_rate: 0.0,
                burst_amplitude: 0.0,
            },
            EmotionProfile {
                label: Emotion::Disgust,
                breathing: MotionComponent::new(0.005, 0.28, 0.0),
                heartbeat: heart(80.0),
                hr_variability: 0.06,
                motion_noise_std: 0.0001,
                burst_rate: 3.0,
                burst_amplitude: 0.004,
            },
            EmotionProfile {
                label: Emotion::Joy,
                breathing: MotionComponent::new(0.005, 0.30, 0.0),
                heartbeat: heart(85.0),
                hr_variability: 0.06,
                motion_noise_std: 0.0001,
                burst_rate: 0.0,
                burst_amplitude: 0.0,
            },
        ]
    }
}

fn sample_count(rate: f64, duration: f64) -> Result<usize, SynthError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid("rate", format!("{rate} must be > 0")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid("duration", format!("{duration} must be > 0")));
    }
    Ok(((rate * duration).round() as usize).max(1))
}

/// Quasi-periodic displacement `sum_i A_i sin(2 pi f_i t + phi_i)`.
///
/// With `jitter > 0` each cycle of each component runs at
/// `f_i * (1 + jitter * z)`, `z ~ N(0, 1)`, redrawn at every cycle boundary.
/// `noise_std` adds white Gaussian displacement noise.
pub fn body_motion(
    components: &[MotionComponent],
    jitter: f64,
    noise_std: f64,
    rate: f64,
    duration: f64,
    seed: u64,
) -> Result<TimeSeries, SynthError> {
    if components.is_empty() {
        return Err(SynthError::NoComponents);
    }
    for c in components {
        c.validate()?;
    }
    if !(0.0..1.0).contains(&jitter) {
        return Err(invalid("jitter", "must lie in [0, 1)"));
    }
    if !(noise_std >= 0.0) {
        return Err(invalid("noise_std", "must be >= 0"));
    }
    let n = sample_count(rate, duration)?;
    let mut out = vec![0.0; n];
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    for (ci, comp) in components.iter().enumerate() {
        let mut rng = seed::rng(seed::derive(seed, ci as u64));
        // phase(t) = p0 + freq * (t - t0), in cycles
        let (mut t0, mut p0, mut freq) = (0.0, 0.0, comp.frequency);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let z: f64 = unit.sample(rng);
            comp.frequency * (1.0 + jitter * z).max(0.2)
        };
        if jitter > 0.0 {
            freq = draw(&mut rng);
        }
        for (i, v) in out.iter_mut().enumerate() {
            let t = i as f64 / rate;
            let mut cycles = p0 + freq * (t - t0);
            if jitter > 0.0 {
                while cycles >= p0.floor() + 1.0 {
                    let boundary = p0.floor() + 1.0;
                    t0 += (boundary - p0) / freq;
                    p0 = boundary;
                    freq = draw(&mut rng);
                    cycles = p0 + freq * (t - t0);
                }
            }
            *v += comp.amplitude * (2.0 * PI * cycles + comp.phase).sin();
        }
    }

    if noise_std > 0.0 {
        let noise = Normal::new(0.0, noise_std).map_err(|e| invalid("noise_std", e.to_string()))?;
        let mut rng = seed::rng(seed::derive_named(seed, "motion-noise"));
        for v in out.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    Ok(TimeSeries::new(out, rate)?)
}

/// Adds smooth transient displacements (posture shifts) at Poisson times.
pub fn add_motion_bursts(
    motion: &TimeSeries,
    rate_per_min: f64,
    amplitude: f64,
    seed: u64,
) -> Result<TimeSeries, SynthError> {
    if rate_per_min <= 0.0 || amplitude <= 0.0 {
        return Ok(motion.clone());
    }
    let mut rng = seed::rng(seed);
    let duration = motion.duration();
    let expected = rate_per_min * duration / 60.0;
    let count = Poisson::new(expected)
        .map_err(|e| invalid("burst_rate", e.to_string()))?
        .sample(&mut rng) as usize;
    let fs = motion.sample_rate();
    let mut out = motion.samples().to_vec();
    for _ in 0..count {
        let centre = rng.random_range(0.0..duration);
        let width = rng.random_range(0.4..1.2);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let peak = sign * amplitude * rng.random_range(0.6..1.4);
        let lo = ((centre - 5.0 * width) * fs).floor().max(0.0) as usize;
        let hi = (((centre + 5.0 * width) * fs).ceil() as usize).min(out.len());
        for (i, v) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let dt = (i as f64 / fs - centre) / width;
            *v += peak * (-0.5 * dt * dt).exp();
        }
    }
    Ok(motion.map_samples(out)?)
}

/// Phase difference between transmitted and reflected carrier:
/// `phase_offset - (2 / c) * 2 pi f_c * motion(t) + noise`.
pub fn simulate_rf_phase(motion: &TimeSeries, cfg: &RadarConfig, seed: u64) -> Result<TimeSeries, SynthError> {
    cfg.validate()?;
    let peak = motion.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak >= cfg.static_distance {
        return Err(SynthError::UnphysicalMotion {
            amplitude: peak,
            distance: cfg.static_distance,
        });
    }
    let k = cfg.phase_per_metre();
    let mut phase: Vec<f64> = motion.samples().iter().map(|m| cfg.phase_offset - k * m).collect();
    let sigma = cfg.noise_std / cfg.reflection_magnitude;
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| invalid("noise_std", e.to_string()))?;
        let mut rng = seed::rng(seed);
        for p in phase.iter_mut() {
            *p += noise.sample(&mut rng);
        }
    }
    Ok(motion.map_samples(phase)?)
}

/// Beat times (s) with RR ~ 60/mean_hr + N(0, hrv_std^2), clamped to
/// [0.25, 2.5] s. The first beat sits half an interval after t = 0.
pub fn ecg_beat_times(mean_hr: f64, hrv_std: f64, duration: f64, seed: u64) -> Result<Vec<f64>, SynthError> {
    if !(30.0..=220.0).contains(&mean_hr) {
        return Err(invalid("mean_hr", format!("{mean_hr} bpm outside [30, 220]")));
    }
    if !(hrv_std >= 0.0) {
        return Err(invalid("hrv_std", "must be >= 0"));
    }
    let mean_rr = 60.0 / mean_hr;
    let jitter = Normal::new(0.0, hrv_std).map_err(|e| invalid("hrv_std", e.to_string()))?;
    let mut rng = seed::rng(seed);
    let mut beats = Vec::new();
    let mut t = 0.5 * mean_rr;
    while t < duration {
        beats.push(t);
        let rr = if hrv_std > 0.0 {
            mean_rr + jitter.sample(&mut rng)
        } else {
            mean_rr
        };
        t += rr.clamp(0.25, 2.5);
    }
    Ok(beats)
}

/// (offset s, amplitude mV, width s) of the P, Q, R, S and T bumps.
const ECG_WAVES: [(f64, f64, f64); 5] = [
    (-0.16, 0.12, 0.025),
    (-0.03, -0.10, 0.008),
    (0.0, 1.0, 0.012),
    (0.03, -0.15, 0.008),
    (0.22, 0.25, 0.04),
];

/// Renders a Gaussian-bump ECG (R amplitude 1.0 mV) at the given beat times.
pub fn render_ecg(beats: &[f64], rate: f64, duration: f64) -> Result<TimeSeries, SynthError> {
    let n = sample_count(rate, duration)?;
    let mut out = vec![0.0; n];
    for &b in beats {
        for &(offset, amp, width) in &ECG_WAVES {
            let centre = b + offset;
            let lo = ((centre - 5.0 * width) * rate).floor().max(0.0) as usize;
            let hi = (((centre + 5.0 * width) * rate).ceil().max(0.0) as usize).min(n);
            for (i, v) in out.iter_mut().enumerate().take(hi).skip(lo) {
                let dt = (i as f64 / rate - centre) / width;
                *v += amp * (-0.5 * dt * dt).exp();
            }
        }
    }
    Ok(TimeSeries::new(out, rate)?)
}

/// Synthetic ECG; see [`ecg_beat_times`] and [`render_ecg`].
pub fn synthesize_ecg(
    mean_hr: f64,
    hrv_std: f64,
    rate: f64,
    duration: f64,
    seed: u64,
) -> Result<TimeSeries, SynthError> {
    synthesize_ecg_with_beats(mean_hr, hrv_std, rate, duration, seed).map(|(ts, _)| ts)
}

/// Like [`synthesize_ecg`] but also returns the ground-truth beat times.
pub fn synthesize_ecg_with_beats(
    mean_hr: f64,
    hrv_std: f64,
    rate: f64,
    duration: f64,
    seed: u64,
) -> Result<(TimeSeries, Vec<f64>), SynthError> {
    if !(rate >= 100.0) {
        return Err(invalid("rate", format!("{rate} Hz is below 100 Hz")));
    }
    let beats = ecg_beat_times(mean_hr, hrv_std, duration, seed)?;
    let ts = render_ecg(&beats, rate, duration)?;
    Ok((ts, beats))
}

/// Extra knobs for [`generate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOptions {
    /// Also synthesize a simultaneous ECG per recording.
    pub with_ecg: bool,
    /// ECG sampling rate in Hz.
    pub ecg_rate: f64,
    /// Relative spread of per-subject physiology (rates and amplitudes).
    pub subject_variation: f64,
    /// Baseline wander amplitude of the ECG in mV.
    pub ecg_wander: f64,
    /// White noise of the ECG in mV.
    pub ecg_noise: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            with_ecg: true,
            ecg_rate: 250.0,
            subject_variation: 0.05,
            ecg_wander: 0.1,
            ecg_noise: 0.02,
        }
    }
}

/// Per-subject physiology multipliers, shared by all of a subject's sessions.
#[derive(Debug, Clone, Copy)]
struct SubjectTraits {
    breath_rate: f64,
    breath_depth: f64,
    heart_rate: f64,
    heart_depth: f64,
}

impl SubjectTraits {
    fn draw(spread: f64, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut factor = |scale: f64| (1.0 + scale * unit.sample(&mut rng)).clamp(0.5, 1.5);
        Self {
            breath_rate: factor(spread),
            breath_depth: factor(2.0 * spread),
            heart_rate: factor(0.5 * spread),
            heart_depth: factor(2.0 * spread),
        }
    }
}

/// One RF phase recording (and optionally an ECG) per subject and emotion.
pub fn generate_dataset(
    profiles: &[EmotionProfile],
    n_subjects: usize,
    cfg: &RadarConfig,
    options: &DatasetOptions,
    seed: u64,
) -> Result<LabeledDataset, SynthError> {
    cfg.validate()?;
    if n_subjects < 2 {
        return Err(invalid("n_subjects", format!("{n_subjects} < 2")));
    }
    if profiles.is_empty() {
        return Err(invalid("profiles", "no emotion profiles"));
    }
    for (i, p) in profiles.iter().enumerate() {
        p.validate()?;
        if profiles[..i].iter().any(|q| q.label == p.label) {
            return Err(SynthError::DuplicateLabel(p.label));
        }
    }
    if !(options.subject_variation >= 0.0 && options.subject_variation < 0.5) {
        return Err(invalid("subject_variation", "must lie in [0, 0.5)"));
    }

    let mut samples = Vec::with_capacity(n_subjects * profiles.len());
    for subject in 0..n_subjects {
        let subject_seed = seed::derive(seed, subject as u64);
        let traits = SubjectTraits::draw(options.subject_variation, subject_seed);
        for p in profiles {
            let rec_seed = seed::derive(subject_seed, 100 + p.label.class_id() as u64);
            let mut rng = seed::rng(seed::derive_named(rec_seed, "phases"));
            let breathing = MotionComponent::new(
                p.breathing.amplitude * traits.breath_depth,
                p.breathing.frequency * traits.breath_rate,
                rng.random_range(0.0..2.0 * PI),
            );
            let heart_hz = p.heartbeat.frequency * traits.heart_rate;
            let heartbeat = MotionComponent::new(
                p.heartbeat.amplitude * traits.heart_depth,
                heart_hz,
                rng.random_range(0.0..2.0 * PI),
            );
            let motion = body_motion(
                &[breathing, heartbeat],
                p.hr_variability,
                p.motion_noise_std,
                cfg.sample_rate,
                cfg.duration,
                seed::derive_named(rec_seed, "motion"),
            )?;
            let motion = add_motion_bursts(
                &motion,
                p.burst_rate,
                p.burst_amplitude,
                seed::derive_named(rec_seed, "bursts"),
            )?;
            let rf = simulate_rf_phase(&motion, cfg, seed::derive_named(rec_seed, "radar"))?;

            let ecg = if options.with_ecg {
                let hr = (heart_hz * 60.0).clamp(30.0, 220.0);
                let hrv_std = p.hr_variability * 60.0 / hr;
                let ecg = synthesize_ecg(
                    hr,
                    hrv_std,
                    options.ecg_rate,
                    cfg.duration,
                    seed::derive_named(rec_seed, "ecg"),
                )?;
                Some(add_ecg_artifacts(
                    &ecg,
                    options.ecg_wander,
                    options.ecg_noise,
                    seed::derive_named(rec_seed, "ecg-noise"),
                )?)
            } else {
                None
            };

            samples.push(Sample {
                id: format!("s{:02}_{}", subject + 1, p.label),
                subject: subject as u32 + 1,
                label: p.label,
                rf,
                ecg,
            });
        }
    }
    Ok(LabeledDataset { samples })
}

/// Baseline wander (slow sinusoid) plus white noise.
fn add_ecg_artifacts(ecg: &TimeSeries, wander: f64, noise_std: f64, seed: u64) -> Result<TimeSeries, SynthError> {
    let mut rng = seed::rng(seed);
    let wander_hz = rng.random_range(0.1..0.3);
    let wander_phase = rng.random_range(0.0..2.0 * PI);
    let noise = Normal::new(0.0, noise_std).map_err(|e| invalid("ecg_noise", e.to_string()))?;
    let fs = ecg.sample_rate();
    let out = ecg
        .samples()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let t = i as f64 / fs;
            let n = if noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            v + wander * (2.0 * PI * wander_hz * t + wander_phase).sin() + n
        })
        .collect();
    Ok(ecg.map_samples(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_is_pure_sine() {
        let c = MotionComponent::new(0.005, 0.25, 0.0);
        let m = body_motion(&[c], 0.0, 0.0, 50.0, 20.0, 1).unwrap();
        for (i, v) in m.samples().iter().enumerate() {
            let want = 0.005 * (2.0 * PI * 0.25 * i as f64 / 50.0).sin();
            assert!((v - want).abs() < 1e-15);
        }
        let peak = m.samples().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!((peak - 0.005).abs() < 1e-12);
    }

    #[test]
    fn superposition_without_jitter() {
        let a = MotionComponent::new(0.004, 0.3, 0.1);
        let b = MotionComponent::new(0.0005, 1.2, 0.7);
        let both = body_motion(&[a, b], 0.0, 0.0, 50.0, 10.0, 3).unwrap();
        let ma = body_motion(&[a], 0.0, 0.0, 50.0, 10.0, 3).unwrap();
        let mb = body_motion(&[b], 0.0, 0.0, 50.0, 10.0, 3).unwrap();
        for i in 0..both.len() {
            let sum = ma.samples()[i] + mb.samples()[i];
            assert!((both.samples()[i] - sum).abs() < 1e-15);
        }
    }

    #[test]
    fn body_motion_is_seed_deterministic() {
        let c = [MotionComponent::new(0.005, 0.25, 0.0)];
        let a = body_motion(&c, 0.1, 1e-4, 50.0, 30.0, 42).unwrap();
        let b = body_motion(&c, 0.1, 1e-4, 50.0, 30.0, 42).unwrap();
        let d = body_motion(&c, 0.1, 1e-4, 50.0, 30.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        assert!(matches!(
            body_motion(&[], 0.0, 0.0, 50.0, 1.0, 0),
            Err(SynthError::NoComponents)
        ));
    }

    #[test]
    fn rf_phase_amplitude_for_5mm() {
        let cfg = RadarConfig {
            noise_std: 0.0,
            ..RadarConfig::default()
        };
        let c = MotionComponent::new(0.005, 0.25, PI / 2.0);
        let m = body_motion(&[c], 0.0, 0.0, 50.0, 4.0, 0).unwrap();
        let phase = simulate_rf_phase(&m, &cfg, 0).unwrap();
        let amp = phase.samples().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        // (2 / c) * 2 pi * 5.8e9 * 0.005 = 1.2157 rad
        let want = 2.0 / 299_792_458.0 * 2.0 * PI * 5.8e9 * 0.005;
        assert!((amp - want).abs() < 1e-12);
        assert!((amp - 1.215).abs() / 1.215 < 1e-3);
    }

    #[test]
    fn rf_phase_zero_motion_and_linearity() {
        let cfg = RadarConfig {
            noise_std: 0.0,
            phase_offset: 0.7,
            ..RadarConfig::default()
        };
        let zero = TimeSeries::new(vec![0.0; 10], 50.0).unwrap();
        let p = simulate_rf_phase(&zero, &cfg, 0).unwrap();
        assert!(p.samples().iter().all(|v| *v == 0.7));

        let m = body_motion(&[MotionComponent::new(0.003, 0.3, 0.0)], 0.0, 0.0, 50.0, 5.0, 0).unwrap();
        let m2 = m.map_samples(m.samples().iter().map(|v| 2.0 * v).collect()).unwrap();
        let p1 = simulate_rf_phase(&m, &cfg, 0).unwrap();
        let p2 = simulate_rf_phase(&m2, &cfg, 0).unwrap();
        for (a, b) in p1.samples().iter().zip(p2.samples()) {
            assert!(((b - 0.7) - 2.0 * (a - 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn rf_phase_rejects_unphysical_motion() {
        let m = TimeSeries::new(vec![0.0, 0.5], 50.0).unwrap();
        assert!(matches!(
            simulate_rf_phase(&m, &RadarConfig::default(), 0),
            Err(SynthError::UnphysicalMotion { .. })
        ));
    }

    #[test]
    fn ecg_regular_rhythm() {
        let beats = ecg_beat_times(60.0, 0.0, 10.0, 0).unwrap();
        assert!(beats.len() == 10 || beats.len() == 11);
        for w in beats.windows(2) {
            assert!((w[1] - w[0] - 1.0).abs() < 1e-12);
        }
        let beats = ecg_beat_times(120.0, 0.0, 10.0, 0).unwrap();
        for w in beats.windows(2) {
            assert!((w[1] - w[0] - 0.5).abs() < 1e-12);
        }
        let ecg = synthesize_ecg(60.0, 0.0, 154.0, 10.0, 0).unwrap();
        assert_eq!(ecg.len(), 1540);
        let peak = ecg.samples().iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - 1.0).abs() < 0.05);
    }

    #[test]
    fn ecg_rr_spread_matches_hrv() {
        let beats = ecg_beat_times(60.0, 0.05, 301.0, 9).unwrap();
        let rr: Vec<f64> = beats.windows(2).map(|w| w[1] - w[0]).take(300).collect();
        assert_eq!(rr.len(), 300);
        let m = rr.iter().sum::<f64>() / rr.len() as f64;
        let sd = (rr.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (rr.len() - 1) as f64).sqrt();
        assert!((sd - 0.05).abs() < 0.15 * 0.05, "sd {sd}");
    }

    #[test]
    fn ecg_preconditions() {
        assert!(synthesize_ecg(20.0, 0.0, 154.0, 10.0, 0).is_err());
        assert!(synthesize_ecg(60.0, 0.0, 50.0, 10.0, 0).is_err());
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let cfg = RadarConfig {
            duration: 20.0,
            ..RadarConfig::default()
        };
        let opts = DatasetOptions::default();
        let ds = generate_dataset(&EmotionProfile::defaults(), 2, &cfg, &opts, 5).unwrap();
        assert_eq!(ds.len(), 8);
        assert_eq!(ds.class_counts(), [2, 2, 2, 2]);
        assert!(ds.samples.iter().all(|s| s.ecg.is_some()));
        let again = generate_dataset(&EmotionProfile::defaults(), 2, &cfg, &opts, 5).unwrap();
        assert_eq!(ds, again);
        let other = generate_dataset(&EmotionProfile::defaults(), 2, &cfg, &opts, 6).unwrap();
        assert_ne!(ds.samples[0].rf, other.samples[0].rf);
    }

    #[test]
    fn dataset_rejects_duplicate_labels() {
        let mut profiles = EmotionProfile::defaults();
        profiles[1].label = Emotion::Relax;
        let err = generate_dataset(&profiles, 2, &RadarConfig::default(), &DatasetOptions::default(), 0);
        assert!(matches!(err, Err(SynthError::DuplicateLabel(Emotion::Relax))));
    }
}
