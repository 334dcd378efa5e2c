use std::path::PathBuf;

use rfaffect_core::classic::ClassicError;
use rfaffect_core::eval::EvalError;
use rfaffect_core::features::FeatureError;
use rfaffect_core::signal::SignalError;
use rfaffect_core::synth::SynthError;
use rfaffect_core::transform::TransformError;
use rfaffect_neural::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact {}: run `rfaffect {stage}` first", path.display())]
    Missing { path: PathBuf, stage: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// 0 success, 2 config error, 3 missing artifact, 4 numeric failure,
    /// 1 for anything else (I/O, malformed files).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Missing { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn missing(path: impl Into<PathBuf>, stage: impl Into<String>) -> Self {
        CliError::Missing {
            path: path.into(),
            stage: stage.into(),
        }
    }

    /// Prefixes the message with some context, keeping the kind.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
            CliError::Other(m) => CliError::Other(format!("{what}: {m}")),
            missing => missing,
        }
    }
}

/// Fold errors arrive as strings; the neural engine tags numeric blow-ups.
fn from_message(m: String) -> CliError {
    if m.contains("numeric failure") || m.contains("non-finite") {
        CliError::Numeric(m)
    } else {
        CliError::Other(m)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv: {e}"))
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite(_) => CliError::Numeric(e.to_string()),
            NnError::Config(_) => CliError::Config(e.to_string()),
            other => from_message(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Perplexity { .. } => CliError::Config(e.to_string()),
            EvalError::Degenerate => CliError::Numeric(e.to_string()),
            other => from_message(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ClassicError> for CliError {
    fn from(e: ClassicError) -> Self {
        from_message(e.to_string())
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::Io(_) | SignalError::Csv(_) | SignalError::Parse { .. } | SignalError::NonUniform { .. } => {
                CliError::Other(e.to_string())
            }
            SignalError::InvalidRate(_)
            | SignalError::BandEdges { .. }
            | SignalError::UnsupportedOrder(_)
            | SignalError::WindowTooLong { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        CliError::Numeric(e.to_string())
    }
}
