//! One function per command. Stages communicate only through files in the
//! run directory; each checks its inputs and skips itself when its outputs
//! are newer than its inputs and were built from the same settings.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use rfaffect_core::classic::{self, ClassifierKind, ClassifierSpec, TrainedClassifier};
use rfaffect_core::eval::{self, CvOptions, EvaluationReport, TsneOptions};
use rfaffect_core::features::{self, FeatureTable};
use rfaffect_core::pipeline::{FeaturePipeline, Standardizer};
use rfaffect_core::synth::generate_dataset;
use rfaffect_core::transform;
use rfaffect_core::{seed, Emotion, Matrix, TimeSeries};
use rfaffect_neural::inputs::{ecg_image_input, predict_over_time, rf_network_input, EcgInputConfig, RfInputConfig};
use rfaffect_neural::model::build_ecg_model_with;
use rfaffect_neural::pipeline::{EcgNetPipeline, RfNetPipeline};
use rfaffect_neural::train::write_loss_csv;
use rfaffect_neural::{train as train_net, Model, NetSample, Tensor, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::{InputKind, RunConfig};
use crate::error::CliError;
use crate::manifest::{read_series, resolve, DatasetManifest, SampleEntry, MANIFEST_FILE};
use crate::plot::{self, Series};
use crate::ModelArgs;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub force: bool,
}

impl Ctx {
    fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.out.join(rel)
    }

    fn manifest(&self) -> Result<DatasetManifest, CliError> {
        DatasetManifest::load(&self.out)
    }
}

// ---------------------------------------------------------------------------
// Staleness

fn mtime(p: &Path) -> Option<SystemTime> {
    fs::metadata(p).and_then(|m| m.modified()).ok()
}

/// True when every output and the stamp exist, the stamp records the same
/// settings, and nothing in `inputs` is newer than the oldest output.
fn up_to_date(ctx: &Ctx, inputs: &[PathBuf], outputs: &[PathBuf], stamp: &Path, fingerprint: &str) -> bool {
    if ctx.force {
        return false;
    }
    match fs::read_to_string(stamp) {
        Ok(s) if s == fingerprint => {}
        _ => return false,
    }
    let mut oldest = match mtime(stamp) {
        Some(t) => t,
        None => return false,
    };
    for o in outputs {
        match mtime(o) {
            Some(t) => oldest = oldest.min(t),
            None => return false,
        }
    }
    inputs.iter().all(|i| mtime(i).is_some_and(|t| t <= oldest))
}

fn skip_note(stage: &str) {
    println!("{stage}: outputs are up to date, skipping (use --force to rebuild)");
}

fn fingerprint<T: Serialize>(parts: &T) -> String {
    serde_json::to_string(parts).expect("settings serialize")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: &str) -> Result<T, CliError> {
    let f = File::open(path).map_err(|_| CliError::missing(path, stage))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn require(path: PathBuf, stage: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::missing(path, stage))
    }
}

fn class_names() -> Vec<String> {
    Emotion::ALL.iter().map(|e| e.name().to_string()).collect()
}

// ---------------------------------------------------------------------------
// synth

pub fn synth(ctx: &Ctx) -> Result<(), CliError> {
    let manifest_path = ctx.path(MANIFEST_FILE);
    if manifest_path.exists() && !ctx.force {
        return Err(CliError::Config(format!(
            "{} already exists; pass --force to overwrite it or choose another --out",
            manifest_path.display()
        )));
    }
    let s = &ctx.cfg.synth;
    let ds = generate_dataset(
        &ctx.cfg.profiles.resolve(),
        s.n_subjects,
        &s.radar,
        &s.dataset,
        ctx.cfg.stage_seed("synth"),
    )?;
    fs::create_dir_all(ctx.path("data"))?;
    let mut entries = Vec::with_capacity(ds.len());
    for sample in &ds.samples {
        let rf_rel = PathBuf::from("data").join(format!("{}_rf.csv", sample.id));
        sample.rf.write_csv(create(&ctx.path(&rf_rel))?)?;
        let (ecg, ecg_rate) = match &sample.ecg {
            Some(e) => {
                let rel = PathBuf::from("data").join(format!("{}_ecg.csv", sample.id));
                e.write_csv(create(&ctx.path(&rel))?)?;
                (Some(rel), Some(e.sample_rate()))
            }
            None => (None, None),
        };
        entries.push(SampleEntry {
            id: sample.id.clone(),
            subject: sample.subject,
            label: sample.label,
            rf: rf_rel,
            rf_rate: Some(sample.rf.sample_rate()),
            ecg,
            ecg_rate,
        });
    }
    DatasetManifest::new(entries).save(&ctx.out)?;
    let counts = ds.class_counts();
    println!("wrote {} samples to {}", ds.len(), ctx.out.display());
    for e in Emotion::ALL {
        println!("  {:<8} {}", e.name(), counts[e.class_id()]);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// preprocess

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SeriesRef {
    path: PathBuf,
    rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PreEntry {
    id: String,
    rf: SeriesRef,
    ecg: Option<SeriesRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PreIndex {
    samples: Vec<PreEntry>,
}

fn manifest_inputs(ctx: &Ctx, m: &DatasetManifest) -> Vec<PathBuf> {
    let mut v = vec![ctx.path(MANIFEST_FILE)];
    for s in &m.samples {
        v.push(resolve(&ctx.out, &s.rf));
        if let Some(e) = &s.ecg {
            v.push(resolve(&ctx.out, e));
        }
    }
    v
}

fn pre_index_path(ctx: &Ctx, m: &DatasetManifest) -> PathBuf {
    ctx.path(&m.cache.preprocessed).join("index.json")
}

pub fn preprocess(ctx: &Ctx) -> Result<(), CliError> {
    let m = ctx.manifest()?;
    let dir = m.cache.preprocessed.clone();
    let index_path = pre_index_path(ctx, &m);
    let stamp = ctx.path(&dir).join(".stamp");
    let fp = fingerprint(&ctx.cfg.preprocess);
    let inputs = manifest_inputs(ctx, &m);
    if up_to_date(ctx, &inputs, std::slice::from_ref(&index_path), &stamp, &fp) {
        skip_note("preprocess");
        return Ok(());
    }
    fs::create_dir_all(ctx.path(&dir))?;
    let _ = fs::remove_file(&stamp);
    let mut index = PreIndex { samples: Vec::new() };
    for s in &m.samples {
        let raw = read_series(&resolve(&ctx.out, &s.rf), s.rf_rate)?;
        let rf = ctx
            .cfg
            .preprocess
            .rf
            .apply(&raw)
            .map_err(|e| CliError::from(e).context(&s.id))?;
        let rf_rel = dir.join(format!("{}_rf.csv", s.id));
        rf.write_csv(create(&ctx.path(&rf_rel))?)?;
        let ecg = match &s.ecg {
            Some(p) => {
                let raw = read_series(&resolve(&ctx.out, p), s.ecg_rate)?;
                let e = ctx
                    .cfg
                    .preprocess
                    .ecg
                    .apply(&raw)
                    .map_err(|e| CliError::from(e).context(&s.id))?;
                let rel = dir.join(format!("{}_ecg.csv", s.id));
                e.write_csv(create(&ctx.path(&rel))?)?;
                Some(SeriesRef {
                    path: rel,
                    rate: e.sample_rate(),
                })
            }
            None => None,
        };
        index.samples.push(PreEntry {
            id: s.id.clone(),
            rf: SeriesRef {
                path: rf_rel,
                rate: rf.sample_rate(),
            },
            ecg,
        });
    }
    write_json(&index_path, &index)?;
    write_text(&stamp, &fp)?;
    println!(
        "preprocessed {} samples into {}",
        m.samples.len(),
        ctx.path(&dir).display()
    );
    Ok(())
}

struct Preprocessed {
    rf: Vec<TimeSeries>,
    ecg: Option<Vec<TimeSeries>>,
}

fn load_preprocessed(ctx: &Ctx, m: &DatasetManifest) -> Result<(PathBuf, Preprocessed), CliError> {
    let index_path = pre_index_path(ctx, m);
    let index: PreIndex = read_json(&index_path, "preprocess")?;
    let ids: Vec<&str> = index.samples.iter().map(|e| e.id.as_str()).collect();
    let want: Vec<&str> = m.samples.iter().map(|s| s.id.as_str()).collect();
    if ids != want {
        return Err(CliError::missing(index_path, "preprocess --force"));
    }
    let load = |r: &SeriesRef| read_series(&ctx.path(&r.path), Some(r.rate));
    let rf = index
        .samples
        .iter()
        .map(|e| load(&e.rf))
        .collect::<Result<Vec<_>, _>>()?;
    let ecg = if index.samples.iter().all(|e| e.ecg.is_some()) {
        Some(
            index
                .samples
                .iter()
                .map(|e| load(e.ecg.as_ref().expect("checked")))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    Ok((index_path, Preprocessed { rf, ecg }))
}

// ---------------------------------------------------------------------------
// features

fn feature_path(ctx: &Ctx, m: &DatasetManifest, input: InputKind) -> PathBuf {
    ctx.path(&m.cache.features)
        .join(format!("{}_features.csv", input.name()))
}

pub fn features(ctx: &Ctx) -> Result<(), CliError> {
    let m = ctx.manifest()?;
    let index_path = require(pre_index_path(ctx, &m), "preprocess")?;
    let dir = ctx.path(&m.cache.features);
    let stamp = dir.join(".stamp");
    let mut outputs = vec![feature_path(ctx, &m, InputKind::Rf)];
    if m.has_ecg() {
        outputs.push(feature_path(ctx, &m, InputKind::Ecg));
    }
    let fp = fingerprint(&ctx.cfg.preprocess);
    if up_to_date(ctx, &[index_path], &outputs, &stamp, &fp) {
        skip_note("features");
        return Ok(());
    }
    let (_, pre) = load_preprocessed(ctx, &m)?;
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(&stamp);
    let rf: Vec<_> = pre
        .rf
        .iter()
        .zip(&m.samples)
        .map(|(ts, s)| features::rf_feature_vector(ts).map_err(|e| CliError::from(e).context(&s.id)))
        .collect::<Result<_, _>>()?;
    let table = FeatureTable::from_vectors(&rf, m.labels())?;
    table.write_csv(create(&outputs[0])?)?;
    println!(
        "rf features: {} x {} -> {}",
        table.values.rows(),
        table.values.cols(),
        outputs[0].display()
    );
    if let Some(ecg) = &pre.ecg {
        let fv: Vec<_> = ecg
            .iter()
            .zip(&m.samples)
            .map(|(ts, s)| {
                features::detect_r_peaks(ts)
                    .and_then(|ibi| features::ibi_features(&ibi))
                    .map_err(|e| CliError::from(e).context(&s.id))
            })
            .collect::<Result<_, _>>()?;
        let table = FeatureTable::from_vectors(&fv, m.labels())?;
        table.write_csv(create(&outputs[1])?)?;
        println!(
            "ecg features: {} x {} -> {}",
            table.values.rows(),
            table.values.cols(),
            outputs[1].display()
        );
    }
    write_text(&stamp, &fp)?;
    Ok(())
}

fn load_table(ctx: &Ctx, m: &DatasetManifest, input: InputKind) -> Result<FeatureTable, CliError> {
    let path = feature_path(ctx, m, input);
    let f = File::open(&path).map_err(|_| CliError::missing(&path, "features"))?;
    let t =
        FeatureTable::read_csv(BufReader::new(f)).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    if t.labels != m.labels() {
        return Err(CliError::missing(path, "features --force"));
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// cwt

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RfCache {
    config: RfInputConfig,
    ids: Vec<String>,
    inputs: Vec<Vec<Tensor>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EcgCache {
    config: EcgInputConfig,
    ids: Vec<String>,
    images: Vec<Tensor>,
}

fn cwt_path(ctx: &Ctx, m: &DatasetManifest, name: &str) -> PathBuf {
    ctx.path(&m.cache.cwt).join(name)
}

fn image_matrix(t: &Tensor) -> Matrix {
    Matrix::from_vec(t.shape[1], t.shape[2], t.data.clone())
}

fn write_scaleogram_files(dir: &Path, m: &DatasetManifest, images: &[Tensor], suffix: &str) -> Result<(), CliError> {
    for (s, img) in m.samples.iter().zip(images) {
        transform::write_pgm(&image_matrix(img), create(&dir.join(format!("{}_{suffix}.pgm", s.id)))?)?;
    }
    // one rendered example per class
    for e in Emotion::ALL {
        if let Some(i) = m.samples.iter().position(|s| s.label == e) {
            let mat = image_matrix(&images[i]);
            let cells: Vec<Vec<f64>> = (0..mat.rows()).map(|r| mat.row(r).to_vec()).collect();
            let svg = plot::heatmap(
                &format!(
                    "{} scaleogram ({}), low frequency at bottom",
                    suffix.to_uppercase(),
                    m.samples[i].id
                ),
                &cells,
                &[],
                &[],
                false,
            );
            write_text(&dir.join(format!("example_{}_{suffix}.svg", e.name())), &svg)?;
        }
    }
    Ok(())
}

pub fn cwt(ctx: &Ctx) -> Result<(), CliError> {
    let m = ctx.manifest()?;
    let index_path = require(pre_index_path(ctx, &m), "preprocess")?;
    let dir = ctx.path(&m.cache.cwt);
    let stamp = dir.join(".stamp");
    let mut outputs = vec![cwt_path(ctx, &m, "rf_inputs.json")];
    if m.has_ecg() {
        outputs.push(cwt_path(ctx, &m, "ecg_images.json"));
    }
    let fp = fingerprint(&(&ctx.cfg.preprocess, &ctx.cfg.cwt));
    if up_to_date(ctx, &[index_path], &outputs, &stamp, &fp) {
        skip_note("cwt");
        return Ok(());
    }
    let (_, pre) = load_preprocessed(ctx, &m)?;
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(&stamp);
    let ids: Vec<String> = m.samples.iter().map(|s| s.id.clone()).collect();

    let rc = &ctx.cfg.cwt.rf;
    let inputs: Vec<Vec<Tensor>> = pre
        .rf
        .iter()
        .zip(&m.samples)
        .map(|(ts, s)| rf_network_input(ts, rc).map_err(|e| CliError::from(e).context(&s.id)))
        .collect::<Result<_, _>>()?;
    let sg = transform::cwt_morlet(&pre.rf[0], rc.n_scales, rc.f_min, rc.f_max)?;
    sg.write_scale_csv(create(&dir.join("rf_scales.csv"))?)?;
    let images: Vec<Tensor> = inputs.iter().map(|v| v[1].clone()).collect();
    write_scaleogram_files(&dir, &m, &images, "rf")?;
    write_json(
        &outputs[0],
        &RfCache {
            config: rc.clone(),
            ids: ids.clone(),
            inputs,
        },
    )?;
    println!(
        "rf scaleograms: {} x {}x{} -> {}",
        ids.len(),
        rc.image_h,
        rc.image_w,
        dir.display()
    );

    if let Some(ecg) = &pre.ecg {
        let ec = &ctx.cfg.cwt.ecg;
        let images: Vec<Tensor> = ecg
            .iter()
            .zip(&m.samples)
            .map(|(ts, s)| ecg_image_input(ts, ec).map_err(|e| CliError::from(e).context(&s.id)))
            .collect::<Result<_, _>>()?;
        let sg = transform::cwt_morlet(&ecg[0], ec.n_scales, ec.f_min, ec.f_max)?;
        sg.write_scale_csv(create(&dir.join("ecg_scales.csv"))?)?;
        write_scaleogram_files(&dir, &m, &images, "ecg")?;
        write_json(
            &outputs[1],
            &EcgCache {
                config: ec.clone(),
                ids: ids.clone(),
                images,
            },
        )?;
        println!("ecg scaleograms: {} x {}x{}", ids.len(), ec.image_h, ec.image_w);
    }
    write_text(&stamp, &fp)?;
    Ok(())
}

fn load_rf_cache(ctx: &Ctx, m: &DatasetManifest) -> Result<(PathBuf, Vec<NetSample>), CliError> {
    let path = cwt_path(ctx, m, "rf_inputs.json");
    let cache: RfCache = read_json(&path, "cwt")?;
    if cache
        .ids
        .iter()
        .map(String::as_str)
        .ne(m.samples.iter().map(|s| s.id.as_str()))
        || cache.config != ctx.cfg.cwt.rf
    {
        return Err(CliError::missing(path, "cwt --force"));
    }
    let samples = cache
        .inputs
        .into_iter()
        .zip(&m.samples)
        .map(|(inputs, s)| NetSample {
            inputs,
            label: s.label.class_id(),
        })
        .collect();
    Ok((path, samples))
}

fn load_ecg_cache(ctx: &Ctx, m: &DatasetManifest) -> Result<(PathBuf, Vec<Tensor>), CliError> {
    let path = cwt_path(ctx, m, "ecg_images.json");
    let cache: EcgCache = read_json(&path, "cwt")?;
    if cache
        .ids
        .iter()
        .map(String::as_str)
        .ne(m.samples.iter().map(|s| s.id.as_str()))
        || cache.config != ctx.cfg.cwt.ecg
    {
        return Err(CliError::missing(path, "cwt --force"));
    }
    Ok((path, cache.images))
}

// ---------------------------------------------------------------------------
// Model selection

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Classic(ClassifierKind, InputKind),
    RfNet,
    EcgNet,
}

impl ModelChoice {
    pub fn resolve(cfg: &RunConfig, args: &ModelArgs) -> Result<Self, CliError> {
        let name = args.model.as_deref().unwrap_or(&cfg.loocv.model);
        match name {
            "rf_net" | "ecg_net" => {
                let (choice, own) = if name == "rf_net" {
                    (ModelChoice::RfNet, InputKind::Rf)
                } else {
                    (ModelChoice::EcgNet, InputKind::Ecg)
                };
                match args.input {
                    Some(i) if i != own => Err(CliError::Config(format!(
                        "{name} takes {} input; drop --input {}",
                        own.name(),
                        i.name()
                    ))),
                    _ => Ok(choice),
                }
            }
            other => {
                let kind: ClassifierKind = other
                    .parse()
                    .map_err(|e: String| CliError::Config(format!("{e}, rf_net or ecg_net")))?;
                Ok(ModelChoice::Classic(kind, args.input.unwrap_or(cfg.loocv.input)))
            }
        }
    }

    /// Directory and report name, e.g. `svm_rf` or `rf_net`.
    pub fn tag(&self) -> String {
        match self {
            ModelChoice::Classic(k, i) => format!("{}_{}", k.name(), i.name()),
            ModelChoice::RfNet => "rf_net".into(),
            ModelChoice::EcgNet => "ecg_net".into(),
        }
    }

    fn cli_args(&self) -> String {
        match self {
            ModelChoice::Classic(k, i) => format!("--model {} --input {}", k.name(), i.name()),
            ModelChoice::RfNet => "--model rf_net".into(),
            ModelChoice::EcgNet => "--model ecg_net".into(),
        }
    }
}

fn classifier_spec(ctx: &Ctx, kind: ClassifierKind) -> ClassifierSpec {
    ClassifierSpec {
        kind,
        ..ctx.cfg.classifier.clone()
    }
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassicModelFile {
    input: InputKind,
    /// Selected feature names, in the order the classifier sees them.
    features: Vec<String>,
    columns: Vec<usize>,
    scaler: Standardizer,
    classifier: TrainedClassifier,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EcgNetMeta {
    features: Vec<String>,
    columns: Vec<usize>,
    scaler: Standardizer,
}

fn write_loss(dir: &Path, tag: &str, trace: &[f64]) -> Result<(), CliError> {
    let mut w = create(&dir.join(format!("{tag}_loss.csv")))?;
    write_loss_csv(&mut w, trace)?;
    w.flush()?;
    let svg = plot::line_chart(
        &format!("{tag} training loss"),
        "epoch",
        "mean cross-entropy",
        &[Series {
            name: "loss".into(),
            points: trace.iter().enumerate().map(|(i, &l)| ((i + 1) as f64, l)).collect(),
        }],
        None,
    );
    write_text(&dir.join(format!("{tag}_loss.svg")), &svg)
}

fn all_rows(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn train(ctx: &Ctx, args: &ModelArgs) -> Result<(), CliError> {
    let choice = ModelChoice::resolve(&ctx.cfg, args)?;
    let m = ctx.manifest()?;
    let tag = choice.tag();
    let dir = ctx.path("models");
    let stamp = dir.join(format!(".stamp-{tag}"));
    let seed = ctx.cfg.stage_seed("train");
    match choice {
        ModelChoice::Classic(kind, input) => {
            let src = require(feature_path(ctx, &m, input), "features")?;
            let out = dir.join(format!("{tag}.json"));
            let spec = classifier_spec(ctx, kind).with_seed(seed);
            let fp = fingerprint(&(&spec, ctx.cfg.features.ecg_select));
            if up_to_date(ctx, &[src], std::slice::from_ref(&out), &stamp, &fp) {
                skip_note("train");
                return Ok(());
            }
            let table = load_table(ctx, &m, input)?;
            let y = table.class_ids();
            let rows = all_rows(y.len());
            let scaler = Standardizer::fit(&table.values, &rows);
            let z = scaler.transform(&table.values, &rows);
            let columns = match input {
                InputKind::Rf => (0..z.cols()).collect(),
                InputKind::Ecg => features::mrmr_select(&z, &y, ctx.cfg.features.ecg_select.min(z.cols()))?,
            };
            let x = z.select_cols(&columns);
            let model = classic::fit(&spec, &x, &y)?;
            let hits = (0..x.rows())
                .filter(|&r| model.predict(x.row(r)).ok() == Some(y[r]))
                .count();
            fs::create_dir_all(&dir)?;
            let _ = fs::remove_file(&stamp);
            write_json(
                &out,
                &ClassicModelFile {
                    input,
                    features: columns.iter().map(|&c| table.names[c].clone()).collect(),
                    columns,
                    scaler,
                    classifier: model,
                },
            )?;
            write_text(&stamp, &fp)?;
            println!("{tag}: training accuracy {}/{} -> {}", hits, y.len(), out.display());
        }
        ModelChoice::RfNet => {
            let (src, samples) = load_rf_cache(ctx, &m)?;
            let out = dir.join("rf_net.ckpt");
            let fp = fingerprint(&(&ctx.cfg.network.rf, &ctx.cfg.train.rf, seed));
            if up_to_date(ctx, &[src], std::slice::from_ref(&out), &stamp, &fp) {
                skip_note("train");
                return Ok(());
            }
            let p = RfNetPipeline {
                samples: &samples,
                model: ctx.cfg.network.rf.clone(),
                train: ctx.cfg.train.rf.clone(),
            };
            let (model, trace) = p.fit(&all_rows(samples.len()), seed)?;
            fs::create_dir_all(&dir)?;
            let _ = fs::remove_file(&stamp);
            let mut w = create(&out)?;
            model.save(&mut w)?;
            w.flush()?;
            write_loss(&dir, &tag, &trace)?;
            write_text(&stamp, &fp)?;
            println!(
                "rf_net: {} parameters, final loss {:.4} -> {}",
                model.n_params(),
                trace.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        ModelChoice::EcgNet => {
            let (img_src, images) = load_ecg_cache(ctx, &m)?;
            let feat_src = require(feature_path(ctx, &m, InputKind::Ecg), "features")?;
            let out = dir.join("ecg_net.ckpt");
            let fp = fingerprint(&(
                &ctx.cfg.network.ecg_filters,
                &ctx.cfg.train.ecg,
                ctx.cfg.cwt.ecg.n_features,
                seed,
            ));
            if up_to_date(ctx, &[img_src, feat_src], std::slice::from_ref(&out), &stamp, &fp) {
                skip_note("train");
                return Ok(());
            }
            let table = load_table(ctx, &m, InputKind::Ecg)?;
            let y = table.class_ids();
            let rows = all_rows(y.len());
            let scaler = Standardizer::fit(&table.values, &rows);
            let z = scaler.transform(&table.values, &rows);
            let k = ctx.cfg.cwt.ecg.n_features.min(z.cols());
            let columns = features::mrmr_select(&z, &y, k)?;
            let hw = (images[0].shape[1], images[0].shape[2]);
            let mut model = build_ecg_model_with(hw, k, 4, ctx.cfg.network.ecg_filters)?;
            model.initialize(seed::derive_named(seed, "init"));
            let data: Vec<NetSample> = rows
                .iter()
                .map(|&i| NetSample {
                    inputs: vec![
                        images[i].clone(),
                        Tensor::vector(columns.iter().map(|&c| z.get(i, c)).collect()),
                    ],
                    label: y[i],
                })
                .collect();
            let cfg = TrainConfig {
                seed: seed::derive_named(seed, "shuffle"),
                ..ctx.cfg.train.ecg.clone()
            };
            let trace = train_net(&mut model, &data, &cfg)?;
            fs::create_dir_all(&dir)?;
            let _ = fs::remove_file(&stamp);
            let mut w = create(&out)?;
            model.save(&mut w)?;
            w.flush()?;
            write_json(
                &dir.join("ecg_net.json"),
                &EcgNetMeta {
                    features: columns.iter().map(|&c| table.names[c].clone()).collect(),
                    columns,
                    scaler,
                },
            )?;
            write_loss(&dir, &tag, &trace)?;
            write_text(&stamp, &fp)?;
            println!(
                "ecg_net: {} parameters, final loss {:.4} -> {}",
                model.n_params(),
                trace.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// loocv

fn eval_dir(ctx: &Ctx, tag: &str) -> PathBuf {
    ctx.path("eval").join(tag)
}

pub fn loocv(ctx: &Ctx, args: &ModelArgs) -> Result<(), CliError> {
    let choice = ModelChoice::resolve(&ctx.cfg, args)?;
    let m = ctx.manifest()?;
    let tag = choice.tag();
    let dir = eval_dir(ctx, &tag);
    let stamp = dir.join(".stamp");
    let outputs = vec![
        dir.join("report.json"),
        dir.join("confusion.csv"),
        dir.join("predictions.csv"),
    ];
    let opts = CvOptions {
        mode: ctx.cfg.loocv.mode,
        seed: ctx.cfg.stage_seed("loocv"),
        workers: ctx.cfg.workers,
    };
    let set = m.eval_set();

    // Inputs and settings differ per model family; the worker count is not
    // part of the fingerprint because it cannot change the results.
    let report = match choice {
        ModelChoice::Classic(kind, input) => {
            let src = require(feature_path(ctx, &m, input), "features")?;
            let select = match input {
                InputKind::Rf => None,
                InputKind::Ecg => Some(ctx.cfg.features.ecg_select),
            };
            let spec = classifier_spec(ctx, kind);
            let fp = fingerprint(&(&spec, select, opts.mode, opts.seed));
            if up_to_date(ctx, &[src], &outputs, &stamp, &fp) {
                skip_note("loocv");
                return Ok(());
            }
            let table = load_table(ctx, &m, input)?;
            let y = table.class_ids();
            let p = FeaturePipeline {
                features: &table.values,
                labels: &y,
                n_classes: 4,
                spec,
                select,
            };
            let r = eval::loocv(&p, &set, &opts)?;
            (r, fp)
        }
        ModelChoice::RfNet => {
            let (src, samples) = load_rf_cache(ctx, &m)?;
            let fp = fingerprint(&(&ctx.cfg.network.rf, &ctx.cfg.train.rf, opts.mode, opts.seed));
            if up_to_date(ctx, &[src], &outputs, &stamp, &fp) {
                skip_note("loocv");
                return Ok(());
            }
            let p = RfNetPipeline {
                samples: &samples,
                model: ctx.cfg.network.rf.clone(),
                train: ctx.cfg.train.rf.clone(),
            };
            (eval::loocv(&p, &set, &opts)?, fp)
        }
        ModelChoice::EcgNet => {
            let (img_src, images) = load_ecg_cache(ctx, &m)?;
            let feat_src = require(feature_path(ctx, &m, InputKind::Ecg), "features")?;
            let fp = fingerprint(&(
                &ctx.cfg.network.ecg_filters,
                &ctx.cfg.train.ecg,
                ctx.cfg.cwt.ecg.n_features,
                opts.mode,
                opts.seed,
            ));
            if up_to_date(ctx, &[img_src, feat_src], &outputs, &stamp, &fp) {
                skip_note("loocv");
                return Ok(());
            }
            let table = load_table(ctx, &m, InputKind::Ecg)?;
            let y = table.class_ids();
            let p = EcgNetPipeline {
                images: &images,
                features: &table.values,
                labels: &y,
                n_features: ctx.cfg.cwt.ecg.n_features,
                filters: ctx.cfg.network.ecg_filters,
                train: ctx.cfg.train.ecg.clone(),
            };
            (eval::loocv(&p, &set, &opts)?, fp)
        }
    };
    let (mut report, fp) = report;
    report.model = tag.clone();
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(&stamp);
    write_text(&outputs[0], &(report.to_json()? + "\n"))?;
    let mut w = create(&outputs[1])?;
    report.confusion.write_csv(&mut w, &report.class_names)?;
    w.flush()?;
    let mut w = create(&outputs[2])?;
    report.write_predictions_csv(&mut w)?;
    w.flush()?;
    let cells: Vec<Vec<f64>> = report
        .confusion
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    let svg = plot::heatmap(
        &format!("{tag} confusion (rows true, columns predicted)"),
        &cells,
        &report.class_names,
        &report.class_names,
        true,
    );
    write_text(&dir.join("confusion.svg"), &svg)?;
    write_text(&stamp, &fp)?;
    println!(
        "{tag}: accuracy {:.4} ({}/{}) over {} folds -> {}",
        report.accuracy,
        report.confusion.trace(),
        report.n_samples,
        report.n_folds,
        dir.display()
    );
    Ok(())
}

fn load_report(path: &Path, choice: &ModelChoice) -> Result<EvaluationReport, CliError> {
    let text = fs::read_to_string(path).map_err(|_| CliError::missing(path, format!("loocv {}", choice.cli_args())))?;
    EvaluationReport::from_json(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// roc

pub fn roc(ctx: &Ctx, args: &ModelArgs) -> Result<(), CliError> {
    let choice = ModelChoice::resolve(&ctx.cfg, args)?;
    let tag = choice.tag();
    let dir = eval_dir(ctx, &tag);
    let src = dir.join("report.json");
    let report = load_report(&src, &choice)?;
    let outputs = vec![dir.join("roc.csv"), dir.join("roc_auc.csv"), dir.join("roc.svg")];
    let stamp = dir.join(".stamp-roc");
    if up_to_date(ctx, &[src], &outputs, &stamp, "roc") {
        skip_note("roc");
        return Ok(());
    }
    let _ = fs::remove_file(&stamp);
    let roc = eval::multiclass_roc(&report.true_labels(), &report.score_matrix())?;
    let mut w = create(&outputs[0])?;
    roc.write_csv(&mut w, &report.class_names)?;
    w.flush()?;
    let mut auc = String::from("curve,auc\n");
    let mut series = Vec::new();
    for c in roc.curves() {
        let name = eval::curve_name(c.tag, &report.class_names);
        auc.push_str(&format!("{name},{}\n", c.auc));
        series.push(Series {
            name: format!("{name} ({:.3})", c.auc),
            points: c.points.clone(),
        });
    }
    write_text(&outputs[1], &auc)?;
    let svg = plot::line_chart(
        &format!("{tag} ROC"),
        "false positive rate",
        "true positive rate",
        &series,
        Some((0.0, 1.0)),
    );
    write_text(&outputs[2], &svg)?;
    write_text(&stamp, "roc")?;
    print!("{tag}: AUC");
    for c in roc.curves() {
        print!("  {} {:.3}", eval::curve_name(c.tag, &report.class_names), c.auc);
    }
    println!();
    for &c in &roc.skipped {
        println!(
            "  class {} has no positives; its curve is omitted",
            report.class_names[c]
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// tsne

pub fn tsne(ctx: &Ctx, input: Option<InputKind>) -> Result<(), CliError> {
    let m = ctx.manifest()?;
    let input = input.unwrap_or(ctx.cfg.tsne.input);
    let src = require(feature_path(ctx, &m, input), "features")?;
    let dir = ctx.path("tsne");
    let csv_path = dir.join(format!("{}_embedding.csv", input.name()));
    let stamp = dir.join(format!(".stamp-{}", input.name()));
    let opts = TsneOptions {
        perplexity: ctx.cfg.tsne.perplexity,
        iterations: ctx.cfg.tsne.iterations,
        learning_rate: ctx.cfg.tsne.learning_rate,
        seed: ctx.cfg.stage_seed("tsne"),
    };
    let fp = fingerprint(&opts);
    if up_to_date(ctx, &[src], std::slice::from_ref(&csv_path), &stamp, &fp) {
        skip_note("tsne");
        return Ok(());
    }
    let table = load_table(ctx, &m, input)?;
    let rows = all_rows(table.values.rows());
    let z = Standardizer::fit(&table.values, &rows).transform(&table.values, &rows);
    let r = eval::tsne(&z, &opts)?;
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(&stamp);
    let labels: Vec<String> = table.labels.iter().map(|l| l.name().to_string()).collect();
    let mut w = create(&csv_path)?;
    eval::write_embedding_csv(&mut w, &r.embedding, &labels)?;
    w.flush()?;
    let pts: Vec<(f64, f64, usize)> = (0..r.embedding.rows())
        .map(|i| (r.embedding.get(i, 0), r.embedding.get(i, 1), table.labels[i].class_id()))
        .collect();
    let svg = plot::scatter(&format!("t-SNE of {} features", input.name()), &pts, &class_names());
    write_text(&dir.join(format!("{}_embedding.svg", input.name())), &svg)?;
    write_text(&stamp, &fp)?;
    println!(
        "tsne ({}): {} points, KL {:.4} -> {:.4} -> {}",
        input.name(),
        pts.len(),
        r.kl_initial,
        r.kl_final,
        csv_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// report

/// Metric as `mean ± std` to 3 decimals.
fn pm(mean: f64, std: f64) -> String {
    format!("{mean:.3} ± {std:.3}")
}

pub fn report(ctx: &Ctx) -> Result<(), CliError> {
    let eval_root = ctx.path("eval");
    let mut reports = Vec::new();
    if let Ok(entries) = fs::read_dir(&eval_root) {
        let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        dirs.sort();
        for d in dirs {
            let p = d.join("report.json");
            if p.is_file() {
                let text = fs::read_to_string(&p)?;
                reports.push(
                    EvaluationReport::from_json(&text).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?,
                );
            }
        }
    }
    if reports.is_empty() {
        return Err(CliError::missing(eval_root.join("*/report.json"), "loocv"));
    }
    reports.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.model.cmp(&b.model)));

    let mut md = String::from("| Model | Accuracy (%) | Precision | Recall | F1-score |\n|---|---|---|---|---|\n");
    let mut csv_text = String::from("model,accuracy,precision,precision_std,recall,recall_std,f1,f1_std\n");
    for r in &reports {
        let mt = &r.metrics;
        md.push_str(&format!(
            "| {} | {:.2} | {} | {} | {} |\n",
            r.model,
            100.0 * r.accuracy,
            pm(mt.macro_precision.mean, mt.macro_precision.std),
            pm(mt.macro_recall.mean, mt.macro_recall.std),
            pm(mt.macro_f1.mean, mt.macro_f1.std),
        ));
        csv_text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.model,
            r.accuracy,
            mt.macro_precision.mean,
            mt.macro_precision.std,
            mt.macro_recall.mean,
            mt.macro_recall.std,
            mt.macro_f1.mean,
            mt.macro_f1.std
        ));
    }
    let dir = ctx.path("report");
    fs::create_dir_all(&dir)?;
    write_text(&dir.join("summary.md"), &md)?;
    write_text(&dir.join("summary.csv"), &csv_text)?;
    let chart = dir.join("accuracy.svg");
    if reports.len() >= 2 {
        let labels: Vec<String> = reports.iter().map(|r| r.model.clone()).collect();
        let values: Vec<f64> = reports.iter().map(|r| 100.0 * r.accuracy).collect();
        write_text(
            &chart,
            &plot::bar_chart("LOOCV accuracy", "accuracy (%)", &labels, &values),
        )?;
    } else if chart.exists() {
        fs::remove_file(&chart)?;
    }
    print!("{md}");
    Ok(())
}

// ---------------------------------------------------------------------------
// timeline

pub fn timeline(ctx: &Ctx, recording: Option<PathBuf>, window: Option<f64>, hop: Option<f64>) -> Result<(), CliError> {
    let ckpt = ctx.path("models").join("rf_net.ckpt");
    let f = File::open(&ckpt).map_err(|_| CliError::missing(&ckpt, "train --model rf_net"))?;
    let model = Model::load(BufReader::new(f))?;
    let (ts, stem) = match recording {
        Some(p) => {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "recording".into());
            (read_series(&p, None)?, stem)
        }
        None => {
            let m = ctx.manifest()?;
            let s = &m.samples[0];
            (read_series(&resolve(&ctx.out, &s.rf), s.rf_rate)?, s.id.clone())
        }
    };
    let window = window.unwrap_or(ctx.cfg.timeline.window_s);
    let hop = hop.unwrap_or(ctx.cfg.timeline.hop_s);
    let points = predict_over_time(&model, &ts, window, hop, &ctx.cfg.preprocess.rf, &ctx.cfg.cwt.rf)?;
    let dir = ctx.path("timeline");
    let mut text = String::from("time");
    for n in class_names() {
        text.push(',');
        text.push_str(&n);
    }
    text.push('\n');
    for p in &points {
        text.push_str(&p.time.to_string());
        for v in &p.probs {
            text.push(',');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    write_text(&dir.join(format!("{stem}.csv")), &text)?;
    // straight segments between window centres are the linear interpolation
    let series: Vec<Series> = class_names()
        .into_iter()
        .enumerate()
        .map(|(c, name)| Series {
            name,
            points: points.iter().map(|p| (p.time, p.probs[c])).collect(),
        })
        .collect();
    let svg = plot::line_chart(
        &format!("class probabilities over time ({stem})"),
        "time (s)",
        "probability",
        &series,
        Some((0.0, 1.0)),
    );
    write_text(&dir.join(format!("{stem}.svg")), &svg)?;
    println!("timeline: {} windows -> {}", points.len(), dir.display());
    Ok(())
}
