//! Run configuration: a TOML file of `key = value` pairs grouped in sections.
//! Every section is optional and unknown keys are rejected. Command-line
//! flags override the file.

use std::path::{Path, PathBuf};

use rfaffect_core::classic::ClassifierSpec;
use rfaffect_core::eval::CvMode;
use rfaffect_core::pipeline::{EcgPreprocess, RfPreprocess};
use rfaffect_core::seed;
use rfaffect_core::synth::{DatasetOptions, EmotionProfile, RadarConfig};
use rfaffect_core::Emotion;
use rfaffect_neural::inputs::{EcgInputConfig, RfInputConfig};
use rfaffect_neural::{RfModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Each stage derives its own stream from it by name, so
    /// seed fields inside sections are overwritten.
    pub seed: u64,
    /// LOOCV worker threads.
    pub workers: usize,
    /// Run directory holding the manifest and every artifact.
    pub out: PathBuf,
    pub synth: SynthSection,
    pub profiles: ProfilesSection,
    pub preprocess: PreprocessSection,
    pub features: FeaturesSection,
    pub cwt: CwtSection,
    pub classifier: ClassifierSpec,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub loocv: LoocvSection,
    pub tsne: TsneSection,
    pub timeline: TimelineSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            workers: 1,
            out: PathBuf::from("run"),
            synth: SynthSection::default(),
            profiles: ProfilesSection::default(),
            preprocess: PreprocessSection::default(),
            features: FeaturesSection::default(),
            cwt: CwtSection::default(),
            classifier: ClassifierSpec::default(),
            network: NetworkSection::default(),
            train: TrainSection::default(),
            loocv: LoocvSection::default(),
            tsne: TsneSection::default(),
            timeline: TimelineSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_subjects: usize,
    pub radar: RadarConfig,
    pub dataset: DatasetOptions,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            n_subjects: 15,
            radar: RadarConfig::default(),
            dataset: DatasetOptions::default(),
        }
    }
}

/// Overrides of one built-in emotion profile, in friendly units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOverride {
    pub breathing_hz: Option<f64>,
    pub breathing_mm: Option<f64>,
    pub heart_bpm: Option<f64>,
    pub heart_mm: Option<f64>,
    /// Per-cycle frequency jitter, fraction of the nominal rate.
    pub jitter: Option<f64>,
    pub noise_mm: Option<f64>,
    pub bursts_per_min: Option<f64>,
    pub burst_mm: Option<f64>,
}

impl ProfileOverride {
    fn apply(&self, p: &mut EmotionProfile) {
        if let Some(v) = self.breathing_hz {
            p.breathing.frequency = v;
        }
        if let Some(v) = self.breathing_mm {
            p.breathing.amplitude = v * 1e-3;
        }
        if let Some(v) = self.heart_bpm {
            p.heartbeat.frequency = v / 60.0;
        }
        if let Some(v) = self.heart_mm {
            p.heartbeat.amplitude = v * 1e-3;
        }
        if let Some(v) = self.jitter {
            p.hr_variability = v;
        }
        if let Some(v) = self.noise_mm {
            p.motion_noise_std = v * 1e-3;
        }
        if let Some(v) = self.bursts_per_min {
            p.burst_rate = v;
        }
        if let Some(v) = self.burst_mm {
            p.burst_amplitude = v * 1e-3;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesSection {
    pub relax: ProfileOverride,
    pub scary: ProfileOverride,
    pub disgust: ProfileOverride,
    pub joy: ProfileOverride,
}

impl ProfilesSection {
    pub fn resolve(&self) -> [EmotionProfile; 4] {
        let mut out = EmotionProfile::defaults();
        for p in &mut out {
            let o = match p.label {
                Emotion::Relax => &self.relax,
                Emotion::Scary => &self.scary,
                Emotion::Disgust => &self.disgust,
                Emotion::Joy => &self.joy,
            };
            o.apply(p);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub rf: RfPreprocess,
    pub ecg: EcgPreprocess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// mRmR-selected IBI features used by classical models on ECG input.
    pub ecg_select: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self { ecg_select: 30 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwtSection {
    pub rf: RfInputConfig,
    pub ecg: EcgInputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub rf: RfModelConfig,
    /// Conv2d filter counts of the ECG network.
    pub ecg_filters: [usize; 2],
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            rf: RfModelConfig::default(),
            ecg_filters: [32, 64],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub rf: TrainConfig,
    pub ecg: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    #[default]
    Rf,
    Ecg,
}

impl InputKind {
    pub fn name(self) -> &'static str {
        match self {
            InputKind::Rf => "rf",
            InputKind::Ecg => "ecg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoocvSection {
    pub mode: CvMode,
    /// Model used when `--model` is not given.
    pub model: String,
    pub input: InputKind,
}

impl Default for LoocvSection {
    fn default() -> Self {
        Self {
            mode: CvMode::LeaveOneOut,
            model: "svm".into(),
            input: InputKind::Rf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneSection {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub input: InputKind,
}

impl Default for TsneSection {
    fn default() -> Self {
        Self {
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: 200.0,
            input: InputKind::Rf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimelineSection {
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for TimelineSection {
    fn default() -> Self {
        Self {
            window_s: 30.0,
            hop_s: 5.0,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Child seed for a named stage.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive_named(self.seed, stage)
    }

    /// Checks ranges the TOML types cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        check(self.workers >= 1, || "workers must be >= 1".into())?;
        check(self.synth.n_subjects >= 2, || {
            format!("synth.n_subjects must be >= 2, got {}", self.synth.n_subjects)
        })?;
        self.synth
            .radar
            .validate()
            .map_err(|e| CliError::Config(format!("synth.radar: {e}")))?;
        for p in self.profiles.resolve() {
            p.validate()
                .map_err(|e| CliError::Config(format!("profiles.{}: {e}", p.label)))?;
        }
        let rf = &self.preprocess.rf;
        check(rf.low_hz > 0.0 && rf.low_hz < rf.high_hz, || {
            "preprocess.rf needs 0 < low_hz < high_hz".into()
        })?;
        check(matches!(rf.order, 2 | 4 | 6 | 8), || {
            format!("preprocess.rf.order must be 2, 4, 6 or 8, got {}", rf.order)
        })?;
        check(rf.crop_seconds > 0.0, || {
            "preprocess.rf.crop_seconds must be > 0".into()
        })?;
        let ecg = &self.preprocess.ecg;
        check(
            ecg.sample_rate > 0.0 && ecg.low_hz > 0.0 && ecg.low_hz < ecg.high_hz,
            || "preprocess.ecg needs sample_rate > 0 and 0 < low_hz < high_hz".into(),
        )?;
        check(matches!(ecg.order, 2 | 4 | 6 | 8), || {
            format!("preprocess.ecg.order must be 2, 4, 6 or 8, got {}", ecg.order)
        })?;
        check(ecg.crop_seconds > 0.0, || {
            "preprocess.ecg.crop_seconds must be > 0".into()
        })?;
        check(self.features.ecg_select >= 1, || {
            "features.ecg_select must be >= 1".into()
        })?;
        let c = &self.cwt.rf;
        check(
            c.signal_len >= 8 && c.image_h >= 4 && c.image_w >= 4 && c.n_scales >= 2,
            || "cwt.rf needs signal_len >= 8, image_h/image_w >= 4 and n_scales >= 2".into(),
        )?;
        check(c.f_min > 0.0 && c.f_min < c.f_max && c.fft_max_hz > 0.0, || {
            "cwt.rf needs 0 < f_min < f_max and fft_max_hz > 0".into()
        })?;
        let e = &self.cwt.ecg;
        check(
            e.image_h >= 4 && e.image_w >= 4 && e.n_scales >= 2 && e.n_features >= 1,
            || "cwt.ecg needs image_h/image_w >= 4, n_scales >= 2 and n_features >= 1".into(),
        )?;
        check(e.f_min > 0.0 && e.f_min < e.f_max, || {
            "cwt.ecg needs 0 < f_min < f_max".into()
        })?;
        self.classifier
            .validate()
            .map_err(|e| CliError::Config(format!("classifier: {e}")))?;
        self.train
            .rf
            .validate()
            .map_err(|e| CliError::Config(format!("train.rf: {e}")))?;
        self.train
            .ecg
            .validate()
            .map_err(|e| CliError::Config(format!("train.ecg: {e}")))?;
        let n = &self.network;
        check(n.rf.filters.iter().chain(&n.ecg_filters).all(|&f| f >= 1), || {
            "network filter counts must be >= 1".into()
        })?;
        check(
            n.rf.lstm_hidden >= 1 && n.rf.conv1d_kernel >= 1 && n.rf.conv2d_kernel >= 1,
            || "network.rf kernels and lstm_hidden must be >= 1".into(),
        )?;
        let t = &self.tsne;
        check(t.perplexity > 0.0 && t.iterations >= 1 && t.learning_rate > 0.0, || {
            "tsne needs perplexity > 0, iterations >= 1 and learning_rate > 0".into()
        })?;
        check(self.timeline.window_s > 0.0 && self.timeline.hop_s > 0.0, || {
            "timeline window_s and hop_s must be > 0".into()
        })?;
        Ok(())
    }
}
