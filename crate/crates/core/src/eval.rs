//! Evaluation harness: LOOCV driver, confusion matrix, precision/recall/F1,
//! one-vs-rest ROC with micro and macro aggregates, and exact t-SNE.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("fold {fold} failed: {message}")]
    Fold { fold: usize, message: String },
    #[error("label {label} outside [0, {n_classes})")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("ROC needs both positive and negative samples")]
    OneClass,
    #[error("perplexity {perplexity} infeasible for {n} points (need perplexity < (n - 1) / 3)")]
    Perplexity { perplexity: f64, n: usize },
    #[error("all points are identical; embedding is undefined")]
    Degenerate,
    #[error("worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Confusion matrix and PRF

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W, class_names: &[String]) -> Result<(), EvalError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["true\\pred".to_string()];
        header.extend(class_names.iter().cloned());
        wtr.write_record(&header)?;
        for (name, row) in class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(EvalError::LabelOutOfRange { label, n_classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// The class was never predicted; precision reported as 0.
    pub precision_undefined: bool,
    /// The class never occurs; recall reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation across classes.
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
}

pub fn prf_metrics(cm: &ConfusionMatrix) -> Result<PrfReport, EvalError> {
    let n = cm.n_classes();
    let total = cm.total();
    if n == 0 || total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut per_class = Vec::with_capacity(n);
    for i in 0..n {
        let tp = cm.counts[i][i];
        let row: usize = cm.counts[i].iter().sum();
        let col: usize = (0..n).map(|r| cm.counts[r][i]).sum();
        let precision = if col > 0 { tp as f64 / col as f64 } else { 0.0 };
        let recall = if row > 0 { tp as f64 / row as f64 } else { 0.0 };
        let f1 = if tp > 0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support: row,
            precision_undefined: col == 0,
            recall_undefined: row == 0,
        });
    }
    let collect = |f: fn(&ClassMetrics) -> f64| MeanStd::of(&per_class.iter().map(f).collect::<Vec<_>>());
    let tp = cm.trace();
    // single-label: every error is one FP and one FN
    let errors = total - tp;
    let micro_precision = tp as f64 / (tp + errors) as f64;
    let micro_f1 = (2 * tp) as f64 / (2 * tp + 2 * errors) as f64;
    Ok(PrfReport {
        macro_precision: collect(|m| m.precision),
        macro_recall: collect(|m| m.recall),
        macro_f1: collect(|m| m.f1),
        per_class,
        micro_precision,
        micro_recall: micro_precision,
        micro_f1,
    })
}

// ---------------------------------------------------------------------------
// ROC

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocTag {
    Binary,
    Class(usize),
    Micro,
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub tag: RocTag,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum()
}

/// Binary ROC by sweeping thresholds over the distinct scores in descending
/// order; tied scores move the curve diagonally in one step.
pub fn roc_auc(y_true: &[bool], scores: &[f64]) -> Result<RocCurve, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), scores.len()));
    }
    let pos = y_true.iter().filter(|&&b| b).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::OneClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if y_true[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = trapezoid(&points);
    Ok(RocCurve {
        tag: RocTag::Binary,
        points,
        auc,
    })
}

/// Grid size of the macro-average ROC.
pub const MACRO_GRID: usize = 101;

/// TPR at `fpr`: the highest TPR among points exactly at `fpr`, otherwise
/// linear interpolation between the neighbouring points.
fn tpr_at(points: &[(f64, f64)], fpr: f64) -> f64 {
    let mut exact: Option<f64> = None;
    for &(x, y) in points {
        if x == fpr {
            exact = Some(exact.map_or(y, |e: f64| e.max(y)));
        }
    }
    if let Some(y) = exact {
        return y;
    }
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 < fpr && fpr < x1 {
            return y0 + (y1 - y0) * (fpr - x0) / (x1 - x0);
        }
    }
    points.last().map_or(0.0, |p| p.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassRoc {
    /// `None` for classes absent from `y_true`.
    pub per_class: Vec<Option<RocCurve>>,
    pub skipped: Vec<usize>,
    pub micro: RocCurve,
    pub macro_avg: RocCurve,
}

impl MulticlassRoc {
    pub fn curves(&self) -> impl Iterator<Item = &RocCurve> {
        self.per_class.iter().flatten().chain([&self.micro, &self.macro_avg])
    }

    /// Rows `curve,fpr,tpr` in curve order.
    pub fn write_csv<W: Write>(&self, w: W, class_names: &[String]) -> Result<(), EvalError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["curve", "fpr", "tpr"])?;
        for c in self.curves() {
            let name = curve_name(c.tag, class_names);
            for (x, y) in &c.points {
                wtr.write_record([name.clone(), x.to_string(), y.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn curve_name(tag: RocTag, class_names: &[String]) -> String {
    match tag {
        RocTag::Class(c) => class_names.get(c).cloned().unwrap_or_else(|| format!("class{c}")),
        RocTag::Binary => "binary".into(),
        RocTag::Micro => "micro".into(),
        RocTag::Macro => "macro".into(),
    }
}

/// One-vs-rest ROC per class plus micro (pooled pairs) and macro (mean TPR
/// on a 101-point FPR grid) aggregates.
pub fn multiclass_roc(y_true: &[usize], scores: &Matrix) -> Result<MulticlassRoc, EvalError> {
    let n = y_true.len();
    if scores.rows() != n {
        return Err(EvalError::LengthMismatch(n, scores.rows()));
    }
    let nc = scores.cols();
    if let Some(&label) = y_true.iter().find(|&&l| l >= nc) {
        return Err(EvalError::LabelOutOfRange { label, n_classes: nc });
    }
    let mut per_class = Vec::with_capacity(nc);
    let mut skipped = Vec::new();
    for c in 0..nc {
        let truth: Vec<bool> = y_true.iter().map(|&l| l == c).collect();
        match roc_auc(&truth, &scores.column(c)) {
            Ok(mut curve) => {
                curve.tag = RocTag::Class(c);
                per_class.push(Some(curve));
            }
            Err(EvalError::OneClass) => {
                skipped.push(c);
                per_class.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let present: Vec<&RocCurve> = per_class.iter().flatten().collect();
    if present.is_empty() {
        return Err(EvalError::OneClass);
    }

    let mut truth = Vec::with_capacity(n * nc);
    let mut pooled = Vec::with_capacity(n * nc);
    for (i, &l) in y_true.iter().enumerate() {
        for c in 0..nc {
            truth.push(l == c);
            pooled.push(scores.get(i, c));
        }
    }
    let mut micro = roc_auc(&truth, &pooled)?;
    micro.tag = RocTag::Micro;

    let mut points = vec![(0.0, 0.0)];
    for g in 0..MACRO_GRID {
        let fpr = g as f64 / (MACRO_GRID - 1) as f64;
        let tpr = present.iter().map(|c| tpr_at(&c.points, fpr)).sum::<f64>() / present.len() as f64;
        points.push((fpr, tpr));
    }
    let auc = trapezoid(&points);
    Ok(MulticlassRoc {
        per_class,
        skipped,
        micro,
        macro_avg: RocCurve {
            tag: RocTag::Macro,
            points,
            auc,
        },
    })
}

// ---------------------------------------------------------------------------
// LOOCV

/// Sample metadata the cross-validation driver needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub subjects: Vec<u32>,
    pub class_names: Vec<String>,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A learner that can be trained on a subset of samples and scored on
/// another. Any data-dependent preprocessing (standardization, feature
/// selection) must be fitted on `train` only.
pub trait Pipeline: Sync {
    fn name(&self) -> String;

    /// Per-class scores for every index in `test`, in that order.
    fn fit_predict(&self, train: &[usize], test: &[usize], seed: u64) -> Result<Vec<Vec<f64>>, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    #[default]
    LeaveOneOut,
    LeaveSubjectOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub mode: CvMode,
    pub seed: u64,
    pub workers: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            mode: CvMode::LeaveOneOut,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub sample_id: String,
    pub true_label: usize,
    pub predicted: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub mode: CvMode,
    pub seed: u64,
    pub n_samples: usize,
    pub n_folds: usize,
    pub class_names: Vec<String>,
    pub accuracy: f64,
    pub metrics: PrfReport,
    pub confusion: ConfusionMatrix,
    /// One entry per sample, in dataset order.
    pub predictions: Vec<FoldRecord>,
}

impl EvaluationReport {
    pub fn from_records(
        model: String,
        set: &EvalSet,
        opts: &CvOptions,
        n_folds: usize,
        predictions: Vec<FoldRecord>,
    ) -> Result<Self, EvalError> {
        let nc = set.class_names.len();
        let truth: Vec<usize> = predictions.iter().map(|r| r.true_label).collect();
        let pred: Vec<usize> = predictions.iter().map(|r| r.predicted).collect();
        let confusion = confusion_matrix(&truth, &pred, nc)?;
        let metrics = prf_metrics(&confusion)?;
        Ok(Self {
            model,
            mode: opts.mode,
            seed: opts.seed,
            n_samples: predictions.len(),
            n_folds,
            class_names: set.class_names.clone(),
            accuracy: confusion.accuracy(),
            metrics,
            confusion,
            predictions,
        })
    }

    /// Accuracy recomputed from the prediction log.
    pub fn log_accuracy(&self) -> f64 {
        let hits = self.predictions.iter().filter(|r| r.true_label == r.predicted).count();
        hits as f64 / self.predictions.len() as f64
    }

    pub fn score_matrix(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self.predictions.iter().map(|r| r.scores.clone()).collect();
        Matrix::from_rows(&rows)
    }

    pub fn true_labels(&self) -> Vec<usize> {
        self.predictions.iter().map(|r| r.true_label).collect()
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(s)?)
    }

    /// `sample_id,fold,true,predicted,score_<class>...`
    pub fn write_predictions_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["sample_id", "fold", "true", "predicted"].map(String::from).to_vec();
        header.extend(self.class_names.iter().map(|c| format!("score_{c}")));
        wtr.write_record(&header)?;
        let name = |i: usize| self.class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
        for r in &self.predictions {
            let mut rec = vec![
                r.sample_id.clone(),
                r.fold.to_string(),
                name(r.true_label),
                name(r.predicted),
            ];
            rec.extend(r.scores.iter().map(|s| s.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Test index sets, one per fold.
pub fn folds(set: &EvalSet, mode: CvMode) -> Vec<Vec<usize>> {
    match mode {
        CvMode::LeaveOneOut => (0..set.len()).map(|i| vec![i]).collect(),
        CvMode::LeaveSubjectOut => {
            let mut subjects = set.subjects.clone();
            subjects.sort_unstable();
            subjects.dedup();
            subjects
                .iter()
                .map(|s| (0..set.len()).filter(|&i| set.subjects[i] == *s).collect())
                .collect()
        }
    }
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Cross-validates `pipeline`. Fold `f` receives seed `derive(opts.seed, f)`,
/// so results do not depend on `opts.workers`.
pub fn loocv<P: Pipeline + ?Sized>(
    pipeline: &P,
    set: &EvalSet,
    opts: &CvOptions,
) -> Result<EvaluationReport, EvalError> {
    let n = set.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples { needed: 2, got: n });
    }
    if set.labels.len() != n || set.subjects.len() != n {
        return Err(EvalError::LengthMismatch(n, set.labels.len().min(set.subjects.len())));
    }
    let nc = set.class_names.len();
    if let Some(&label) = set.labels.iter().find(|&&l| l >= nc) {
        return Err(EvalError::LabelOutOfRange { label, n_classes: nc });
    }
    let fold_sets = folds(set, opts.mode);
    if fold_sets.len() < 2 {
        return Err(EvalError::TooFewSamples {
            needed: 2,
            got: fold_sets.len(),
        });
    }

    let run_fold = |(f, test): (usize, &Vec<usize>)| -> Result<Vec<(usize, Vec<f64>)>, EvalError> {
        let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
        let scores = pipeline
            .fit_predict(&train, test, seed::derive(opts.seed, f as u64))
            .map_err(|message| EvalError::Fold { fold: f, message })?;
        if scores.len() != test.len() || scores.iter().any(|s| s.len() != nc) {
            return Err(EvalError::Fold {
                fold: f,
                message: format!("pipeline returned malformed scores for {} test samples", test.len()),
            });
        }
        Ok(test.iter().copied().zip(scores).collect())
    };

    type FoldScores = Vec<(usize, Vec<f64>)>;
    let results: Vec<Result<FoldScores, EvalError>> = if opts.workers <= 1 {
        fold_sets.iter().enumerate().map(run_fold).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| EvalError::ThreadPool(e.to_string()))?;
        pool.install(|| fold_sets.par_iter().enumerate().map(run_fold).collect())
    };

    let mut slots: Vec<Option<FoldRecord>> = vec![None; n];
    for (f, res) in results.into_iter().enumerate() {
        for (i, scores) in res? {
            slots[i] = Some(FoldRecord {
                fold: f,
                sample_id: set.ids[i].clone(),
                true_label: set.labels[i],
                predicted: argmax_first(&scores),
                scores,
            });
        }
    }
    let records: Vec<FoldRecord> = slots
        .into_iter()
        .map(|r| r.expect("every sample is tested exactly once"))
        .collect();
    EvaluationReport::from_records(pipeline.name(), set, opts, fold_sets.len(), records)
}

// ---------------------------------------------------------------------------
// t-SNE

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneOptions {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneOptions {
    fn default() -> Self {
        Self {
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    /// `N x 2`, mean-centred.
    pub embedding: Matrix,
    /// KL(P || Q) at the initial embedding.
    pub kl_initial: f64,
    pub kl_final: f64,
}

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;

/// Conditional affinities with per-point bandwidth found by bisection so that
/// the perplexity matches within 1e-4.
fn affinities(x: &Matrix, perplexity: f64) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(x.row(i), x.row(j));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let di: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i * n + j]).collect();
        let dmin = di.iter().cloned().fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let mut probs = vec![0.0; di.len()];
        for _ in 0..200 {
            let mut sum = 0.0;
            for (pk, dk) in probs.iter_mut().zip(&di) {
                *pk = (-(dk - dmin) * beta).exp();
                sum += *pk;
            }
            let mut h = 0.0;
            for (pk, dk) in probs.iter_mut().zip(&di) {
                *pk /= sum;
                h += *pk * (dk - dmin);
            }
            let entropy = sum.ln() + beta * h;
            let diff = entropy.exp() - perplexity;
            if diff.abs() < 1e-4 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        let mut k = 0;
        for (j, r) in row.iter_mut().enumerate() {
            if j == i {
                *r = 0.0;
            } else {
                *r = probs[k];
                k += 1;
            }
        }
        p[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut sym = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sym[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    sym
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Student-t kernel values and their sum.
fn q_kernel(y: &[f64], n: usize) -> (Vec<f64>, f64) {
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

fn kl_divergence(p: &[f64], y: &[f64], n: usize) -> f64 {
    let (num, sum) = q_kernel(y, n);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                let qij = (num[i * n + j] / sum).max(1e-12);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    kl
}

/// Exact O(N^2) t-SNE into two dimensions.
///
/// Early exaggeration x12 and momentum 0.5 for the first 250 iterations,
/// then momentum 0.8; per-parameter adaptive gains.
pub fn tsne(x: &Matrix, opts: &TsneOptions) -> Result<TsneResult, EvalError> {
    let n = x.rows();
    if n < 10 {
        return Err(EvalError::TooFewSamples { needed: 10, got: n });
    }
    if !(opts.perplexity > 0.0 && opts.perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(EvalError::Perplexity {
            perplexity: opts.perplexity,
            n,
        });
    }
    let first = x.row(0);
    if (1..n).all(|i| x.row(i) == first) {
        return Err(EvalError::Degenerate);
    }
    let p = affinities(x, opts.perplexity);

    let mut rng = seed::rng(opts.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    recentre(&mut y, n);
    let kl_initial = kl_divergence(&p, &y, n);

    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0_f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    for it in 0..opts.iterations {
        let (exag, momentum) = if it < EXAGGERATION_ITERS {
            (EXAGGERATION, 0.5)
        } else {
            (1.0, 0.8)
        };
        let (num, sum) = q_kernel(&y, n);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let coeff = 4.0 * (exag * p[i * n + j] - w / sum) * w;
                grad[2 * i] += coeff * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += coeff * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                (gains[k] * 0.8).max(0.01)
            };
            update[k] = momentum * update[k] - opts.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        recentre(&mut y, n);
    }
    let kl_final = kl_divergence(&p, &y, n);
    Ok(TsneResult {
        embedding: Matrix::from_vec(n, 2, y),
        kl_initial,
        kl_final,
    })
}

fn recentre(y: &mut [f64], n: usize) {
    for c in 0..2 {
        let m = (0..n).map(|i| y[2 * i + c]).sum::<f64>() / n as f64;
        for i in 0..n {
            y[2 * i + c] -= m;
        }
    }
}

/// Embedding rows as `x,y,label`.
pub fn write_embedding_csv<W: Write>(w: W, embedding: &Matrix, labels: &[String]) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "y", "label"])?;
    for (i, label) in labels.iter().enumerate() {
        wtr.write_record([
            embedding.get(i, 0).to_string(),
            embedding.get(i, 1).to_string(),
            label.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_and_prf_fixture() {
        let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 2]]);
        let r = prf_metrics(&cm).unwrap();
        assert_eq!(r.per_class[0].precision, 1.0);
        assert_eq!(r.per_class[0].recall, 0.5);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class[1].precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[1].recall, 1.0);
        assert!((r.per_class[1].f1 - 0.8).abs() < 1e-15);
        assert!((r.macro_f1.mean - 0.7333333333333334).abs() < 1e-12);
        assert_eq!(r.micro_f1, cm.accuracy());
    }

    #[test]
    fn zero_denominator_flags() {
        let cm = confusion_matrix(&[0, 0, 1], &[0, 0, 0], 3).unwrap();
        let r = prf_metrics(&cm).unwrap();
        assert!(r.per_class[1].precision_undefined);
        assert!(r.per_class[2].recall_undefined);
        assert_eq!(r.per_class[2].f1, 0.0);
        assert!(matches!(
            confusion_matrix(&[0], &[5], 3),
            Err(EvalError::LabelOutOfRange { label: 5, .. })
        ));
    }

    #[test]
    fn roc_fixtures() {
        let s = [0.9, 0.8, 0.3, 0.1];
        assert_eq!(roc_auc(&[true, true, false, false], &s).unwrap().auc, 1.0);
        let c = roc_auc(&[true, false, true, false], &s).unwrap();
        assert!((c.auc - 0.75).abs() < 1e-15);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let r = roc_auc(&[true, false, true, false], &neg).unwrap();
        assert!((r.auc - 0.25).abs() < 1e-15);
        assert!(matches!(roc_auc(&[true, true], &[0.1, 0.2]), Err(EvalError::OneClass)));
    }

    #[test]
    fn tsne_rejects_bad_input() {
        let x = Matrix::from_rows(&vec![vec![1.0, 2.0]; 10]);
        let opts = TsneOptions {
            perplexity: 2.0,
            ..TsneOptions::default()
        };
        assert!(matches!(tsne(&x, &opts), Err(EvalError::Degenerate)));
        let x = Matrix::from_rows(&(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>());
        assert!(matches!(
            tsne(&x, &TsneOptions::default()),
            Err(EvalError::Perplexity { .. })
        ));
    }
}
