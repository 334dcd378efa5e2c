//! The `rfaffect` pipeline: synthetic dataset generation, preprocessing,
//! feature and scaleogram extraction, training, leave-one-out evaluation,
//! ROC curves, t-SNE embeddings and a summary report, all driven from one
//! config file and one master seed.
//!
//! Every stage reads from and writes to a run directory (`--out`):
//!
//! ```text
//! run/
//!   manifest.json            dataset manifest
//!   data/                    raw per-sample CSVs (time,value)
//!   preprocessed/            filtered, cropped series + index.json
//!   features/                rf_features.csv, ecg_features.csv
//!   cwt/                     network input caches, PGM scaleograms
//!   models/                  trained classifiers and network checkpoints
//!   eval/<model>/            report.json, confusion.csv, predictions.csv, roc.csv, SVGs
//!   tsne/                    <input>_embedding.csv + SVG
//!   report/                  summary.md, summary.csv, accuracy.svg
//! ```

pub mod config;
pub mod error;
pub mod manifest;
pub mod plot;
pub mod stages;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{InputKind, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rfaffect", version, about = "RF and ECG emotion recognition pipeline")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// LOOCV worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Rebuild outputs even when they are up to date; overwrite an existing dataset.
    #[arg(long, global = true)]
    pub force: bool,
    /// Run directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// knn, decision_tree, random_forest, lda, svm, rf_net or ecg_net.
    #[arg(long)]
    pub model: Option<String>,
    /// Feature source for classical models.
    #[arg(long, value_enum)]
    pub input: Option<InputKind>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate the synthetic RF/ECG dataset and its manifest.
    Synth {
        /// Overrides synth.n_subjects.
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Filter and crop every recording.
    Preprocess,
    /// Extract the RF feature vectors and the IBI features.
    Features,
    /// Compute scaleograms and the network input caches.
    Cwt,
    /// Train one model on the whole dataset.
    Train(ModelArgs),
    /// Cross-validate one model.
    Loocv(ModelArgs),
    /// ROC curves from a model's cross-validation scores.
    Roc(ModelArgs),
    /// Two-dimensional t-SNE embedding of a feature table.
    Tsne {
        #[arg(long, value_enum)]
        input: Option<InputKind>,
    },
    /// Summary table and chart over every cross-validated model.
    Report,
    /// Class probabilities over time from the trained RF network.
    Timeline {
        /// Phase recording CSV (time,value). Defaults to the first dataset sample.
        #[arg(long)]
        recording: Option<PathBuf>,
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        hop: Option<f64>,
    },
}

/// Loads the config, applies flag overrides, validates and runs.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Command::Synth { subjects: Some(n) } = cli.command {
        cfg.synth.n_subjects = n;
    }
    cfg.validate()?;
    let ctx = stages::Ctx {
        out: cfg.out.clone(),
        cfg,
        force: cli.force,
    };
    match cli.command {
        Command::Synth { .. } => stages::synth(&ctx),
        Command::Preprocess => stages::preprocess(&ctx),
        Command::Features => stages::features(&ctx),
        Command::Cwt => stages::cwt(&ctx),
        Command::Train(a) => stages::train(&ctx, &a),
        Command::Loocv(a) => stages::loocv(&ctx, &a),
        Command::Roc(a) => stages::roc(&ctx, &a),
        Command::Tsne { input } => stages::tsne(&ctx, input),
        Command::Report => stages::report(&ctx),
        Command::Timeline { recording, window, hop } => stages::timeline(&ctx, recording, window, hop),
    }
}
