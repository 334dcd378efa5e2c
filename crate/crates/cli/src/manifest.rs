//! Dataset manifest and the on-disk run layout.

use std::collections::HashSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rfaffect_core::eval::EvalSet;
use rfaffect_core::{Emotion, TimeSeries};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_VERSION: &str = "rfaffect-dataset/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One recording. Paths are relative to the manifest's directory unless
/// absolute. Rates are optional; when absent they are inferred from the
/// CSV time column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub id: String,
    pub subject: u32,
    pub label: Emotion,
    pub rf: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecg: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecg_rate: Option<f64>,
}

/// Where derived artifacts live, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CachePaths {
    pub preprocessed: PathBuf,
    pub features: PathBuf,
    pub cwt: PathBuf,
}

impl Default for CachePaths {
    fn default() -> Self {
        Self {
            preprocessed: "preprocessed".into(),
            features: "features".into(),
            cwt: "cwt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: String,
    pub samples: Vec<SampleEntry>,
    #[serde(default)]
    pub cache: CachePaths,
}

impl DatasetManifest {
    pub fn new(samples: Vec<SampleEntry>) -> Self {
        Self {
            version: MANIFEST_VERSION.into(),
            samples,
            cache: CachePaths::default(),
        }
    }

    /// Structural checks: version tag, non-empty, unique ids.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != MANIFEST_VERSION {
            return Err(CliError::Config(format!(
                "manifest version '{}' is not supported (expected '{MANIFEST_VERSION}')",
                self.version
            )));
        }
        if self.samples.is_empty() {
            return Err(CliError::Config("manifest lists no samples".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.samples {
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                return Err(CliError::Config(format!("sample id {:?} is not a plain name", s.id)));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(CliError::Config(format!("duplicate sample id '{}'", s.id)));
            }
        }
        Ok(())
    }

    /// Reads and validates `dir/manifest.json`, checking that every
    /// referenced file exists.
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(CliError::missing(path, "synth"));
        }
        let m: Self = serde_json::from_reader(File::open(&path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        m.validate()?;
        for s in &m.samples {
            for p in std::iter::once(&s.rf).chain(&s.ecg) {
                let full = resolve(dir, p);
                if !full.exists() {
                    return Err(CliError::missing(full, "synth"));
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        use std::io::Write;
        writeln!(w)?;
        Ok(())
    }

    pub fn has_ecg(&self) -> bool {
        self.samples.iter().all(|s| s.ecg.is_some())
    }

    pub fn eval_set(&self) -> EvalSet {
        EvalSet {
            ids: self.samples.iter().map(|s| s.id.clone()).collect(),
            labels: self.samples.iter().map(|s| s.label.class_id()).collect(),
            subjects: self.samples.iter().map(|s| s.subject).collect(),
            class_names: Emotion::ALL.iter().map(|e| e.name().to_string()).collect(),
        }
    }

    pub fn labels(&self) -> Vec<Emotion> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

pub fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Reads a `time,value` CSV. A known rate overrides the one implied by the
/// time column, which keeps round-trips bit-exact.
pub fn read_series(path: &Path, rate: Option<f64>) -> Result<TimeSeries, CliError> {
    let ts = TimeSeries::read_csv_path(path).map_err(|e| CliError::from(e).context(path.display()))?;
    match rate {
        Some(r) => {
            let start = ts.start_time();
            Ok(TimeSeries::with_start(ts.into_samples(), r, start)?)
        }
        None => Ok(ts),
    }
}
