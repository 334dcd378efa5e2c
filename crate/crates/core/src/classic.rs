//! Classical classifiers behind one fit/predict/score interface:
//! KNN, CART decision tree, random forest, LDA and one-vs-rest SVM.
//!
//! Models do not rescale their inputs. Distance and margin based models
//! (KNN, SVM, LDA) expect standardized features; the pipeline does that.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::seed;

pub const MODEL_MAGIC: &str = "RFAFFECT-MODEL-v1";

/// Ridge added to the pooled LDA covariance.
pub const LDA_RIDGE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ClassicError {
    #[error("training data needs at least two classes")]
    SingleClass,
    #[error("empty training set")]
    Empty,
    #[error("{rows} samples but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("expected {expected} features, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),
    #[error("pooled covariance is singular even after ridge regularization")]
    SingularCovariance,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    DecisionTree,
    RandomForest,
    Lda,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Knn,
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::Lda,
        ClassifierKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::Lda => "lda",
            ClassifierKind::Svm => "svm",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown classifier '{s}' (expected knn, decision_tree, random_forest, lda or svm)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmKernel {
    Linear,
    Rbf,
}

/// Classifier choice plus hyperparameters. Fields irrelevant to `kind` are
/// ignored.
///
/// Defaults: `k_neighbors` 5, `max_depth` 8, `n_trees` 100, forest splits
/// draw `round(sqrt(d))` features with bootstrap resampling, SVM `C` 1 with
/// an RBF kernel of `gamma = 1/d`, 200 coordinate-ascent sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub k_neighbors: usize,
    pub max_depth: usize,
    pub n_trees: usize,
    /// Features considered per forest split; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub svm_c: f64,
    pub svm_kernel: SvmKernel,
    /// `None` means `1 / d`.
    pub rbf_gamma: Option<f64>,
    pub svm_sweeps: usize,
    pub seed: u64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Svm,
            k_neighbors: 5,
            max_depth: 8,
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            svm_c: 1.0,
            svm_kernel: SvmKernel::Rbf,
            rbf_gamma: None,
            svm_sweeps: 200,
            seed: 0,
        }
    }
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ClassicError> {
        let bad = |m: &str| Err(ClassicError::Hyperparameter(m.to_string()));
        match self.kind {
            ClassifierKind::Knn if self.k_neighbors == 0 => bad("k_neighbors must be >= 1"),
            ClassifierKind::DecisionTree if self.max_depth == 0 => bad("max_depth must be >= 1"),
            ClassifierKind::RandomForest if self.max_depth == 0 => bad("max_depth must be >= 1"),
            ClassifierKind::RandomForest if self.n_trees == 0 => bad("n_trees must be >= 1"),
            ClassifierKind::RandomForest if self.max_features == Some(0) => bad("max_features must be >= 1"),
            ClassifierKind::Svm if !(self.svm_c > 0.0 && self.svm_c.is_finite()) => bad("svm_c must be positive"),
            ClassifierKind::Svm if self.rbf_gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) => {
                bad("rbf_gamma must be positive")
            }
            ClassifierKind::Svm if self.svm_sweeps == 0 => bad("svm_sweeps must be >= 1"),
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// CART

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        /// Class frequencies, summing to 1.
        dist: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct TreeBuilder<'a, R: Rng> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    max_features: usize,
    rng: Option<R>,
    nodes: Vec<Node>,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let mut dist = vec![0.0; self.n_classes];
        for &i in idx {
            dist[self.y[i]] += 1.0;
        }
        dist.iter_mut().for_each(|v| *v /= idx.len() as f64);
        self.nodes.push(Node::Leaf { dist });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.cols();
        match self.rng.as_mut() {
            Some(rng) if self.max_features < d => {
                let mut f = sample_indices(rng, d, self.max_features).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Lowest weighted Gini split; ties go to the lower feature index, then
    /// the lower threshold.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut total = vec![0usize; self.n_classes];
        for &i in idx {
            total[self.y[i]] += 1;
        }
        let mut order = idx.to_vec();
        for f in self.candidate_features() {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let mut left = vec![0usize; self.n_classes];
            for k in 0..n - 1 {
                left[self.y[order[k]]] += 1;
                let (va, vb) = (self.x.get(order[k], f), self.x.get(order[k + 1], f));
                if va == vb {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let nl = k + 1;
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                if best.is_none_or(|(_, _, s)| score < s) {
                    best = Some((f, 0.5 * (va + vb), score));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        if pure || depth >= self.max_depth || idx.len() < 2 {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, feature) <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

impl Tree {
    fn fit<R: Rng>(
        x: &Matrix,
        y: &[usize],
        idx: &[usize],
        n_classes: usize,
        max_depth: usize,
        max_features: usize,
        rng: Option<R>,
    ) -> Tree {
        let mut b = TreeBuilder {
            x,
            y,
            n_classes,
            max_depth,
            max_features,
            rng,
            nodes: Vec::new(),
        };
        b.grow(idx, 0);
        Tree { nodes: b.nodes }
    }

    fn leaf_dist(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Gini impurity of every leaf, for inspection.
    pub fn leaf_impurities(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { dist } => Some(1.0 - dist.iter().map(|p| p * p).sum::<f64>()),
                Node::Split { .. } => None,
            })
            .collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

// ---------------------------------------------------------------------------
// SVM

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Kernel with a constant 1 added, which absorbs the bias term.
fn kernel(kind: SvmKernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        SvmKernel::Linear => dot(a, b) + 1.0,
        SvmKernel::Rbf => (-gamma * sq_dist(a, b)).exp() + 1.0,
    }
}

/// Dual coordinate ascent for the hinge-loss SVM with box constraint `C`.
/// Returns the dual variables; stops early when the largest projected
/// gradient drops below 1e-8.
fn svm_dual(k: &Matrix, sign: &[f64], c: f64, sweeps: usize, seed: u64) -> Vec<f64> {
    let n = sign.len();
    let mut alpha = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..sweeps {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut max_pg: f64 = 0.0;
        for &i in &order {
            let g = sign[i] * f[i] - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg.abs());
            if pg == 0.0 {
                continue;
            }
            let kii = k.get(i, i);
            let new = (alpha[i] - g / kii).clamp(0.0, c);
            let delta = (new - alpha[i]) * sign[i];
            alpha[i] = new;
            if delta != 0.0 {
                for (j, fj) in f.iter_mut().enumerate() {
                    *fj += delta * k.get(i, j);
                }
            }
        }
        if max_pg < 1e-8 {
            break;
        }
    }
    alpha
}

// ---------------------------------------------------------------------------
// Trained model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Params {
    Knn {
        k: usize,
        x: Matrix,
        y: Vec<usize>,
    },
    Tree(Tree),
    Forest(Vec<Tree>),
    Lda {
        /// One row per class: `S^-1 mu_c`.
        weights: Matrix,
        bias: Vec<f64>,
    },
    SvmLinear {
        /// One row per class, last column is the bias.
        weights: Matrix,
    },
    SvmRbf {
        gamma: f64,
        support: Matrix,
        /// One row per class of `alpha_i * y_i`.
        coef: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub kind: ClassifierKind,
    /// Sorted distinct training labels; score `j` refers to `class_labels[j]`.
    pub class_labels: Vec<usize>,
    pub feature_dim: usize,
    params: Params,
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

/// Trains a classifier. Deterministic in `spec.seed`.
pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[usize]) -> Result<TrainedClassifier, ClassicError> {
    spec.validate()?;
    let n = x.rows();
    let d = x.cols();
    if n == 0 || d == 0 {
        return Err(ClassicError::Empty);
    }
    if y.len() != n {
        return Err(ClassicError::LabelCount {
            rows: n,
            labels: y.len(),
        });
    }
    let mut class_labels = y.to_vec();
    class_labels.sort_unstable();
    class_labels.dedup();
    if class_labels.len() < 2 {
        return Err(ClassicError::SingleClass);
    }
    let nc = class_labels.len();
    let yi: Vec<usize> = y
        .iter()
        .map(|l| class_labels.binary_search(l).expect("label present"))
        .collect();
    let all: Vec<usize> = (0..n).collect();

    let params = match spec.kind {
        ClassifierKind::Knn => Params::Knn {
            k: spec.k_neighbors.min(n),
            x: x.clone(),
            y: yi,
        },
        ClassifierKind::DecisionTree => Params::Tree(Tree::fit::<rand_chacha::ChaCha8Rng>(
            x,
            &yi,
            &all,
            nc,
            spec.max_depth,
            d,
            None,
        )),
        ClassifierKind::RandomForest => {
            let m = spec
                .max_features
                .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
                .min(d);
            let trees = (0..spec.n_trees)
                .map(|t| {
                    let mut rng = seed::rng(seed::derive(spec.seed, t as u64));
                    let idx: Vec<usize> = if spec.bootstrap {
                        (0..n).map(|_| rng.random_range(0..n)).collect()
                    } else {
                        all.clone()
                    };
                    Tree::fit(x, &yi, &idx, nc, spec.max_depth, m, Some(rng))
                })
                .collect();
            Params::Forest(trees)
        }
        ClassifierKind::Lda => fit_lda(x, &yi, nc)?,
        ClassifierKind::Svm => {
            let gamma = spec.rbf_gamma.unwrap_or(1.0 / d as f64);
            let mut k = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = kernel(spec.svm_kernel, gamma, x.row(i), x.row(j));
                    k.set(i, j, v);
                    k.set(j, i, v);
                }
            }
            let mut coef = Matrix::zeros(nc, n);
            for c in 0..nc {
                let sign: Vec<f64> = yi.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                let alpha = svm_dual(
                    &k,
                    &sign,
                    spec.svm_c,
                    spec.svm_sweeps,
                    seed::derive(spec.seed, c as u64),
                );
                for i in 0..n {
                    coef.set(c, i, alpha[i] * sign[i]);
                }
            }
            match spec.svm_kernel {
                SvmKernel::Linear => {
                    let mut weights = Matrix::zeros(nc, d + 1);
                    for c in 0..nc {
                        let w = weights.row_mut(c);
                        for i in 0..n {
                            let a = coef.get(c, i);
                            for (wj, xj) in w[..d].iter_mut().zip(x.row(i)) {
                                *wj += a * xj;
                            }
                            w[d] += a;
                        }
                    }
                    Params::SvmLinear { weights }
                }
                SvmKernel::Rbf => Params::SvmRbf {
                    gamma,
                    support: x.clone(),
                    coef,
                },
            }
        }
    };
    Ok(TrainedClassifier {
        kind: spec.kind,
        class_labels,
        feature_dim: d,
        params,
    })
}

fn fit_lda(x: &Matrix, y: &[usize], nc: usize) -> Result<Params, ClassicError> {
    let (n, d) = (x.rows(), x.cols());
    if n <= nc {
        return Err(ClassicError::SingularCovariance);
    }
    let mut means = vec![vec![0.0; d]; nc];
    let mut counts = vec![0usize; nc];
    for i in 0..n {
        counts[y[i]] += 1;
        for (m, v) in means[y[i]].iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c as f64);
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..n {
        let dev = DVector::from_iterator(d, x.row(i).iter().zip(&means[y[i]]).map(|(a, b)| a - b));
        cov += &dev * dev.transpose();
    }
    cov /= (n - nc) as f64;
    for j in 0..d {
        cov[(j, j)] += LDA_RIDGE;
    }
    let chol = cov.cholesky().ok_or(ClassicError::SingularCovariance)?;
    let mut weights = Matrix::zeros(nc, d);
    let mut bias = vec![0.0; nc];
    for c in 0..nc {
        let w = chol.solve(&DVector::from_column_slice(&means[c]));
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ClassicError::SingularCovariance);
        }
        weights.row_mut(c).copy_from_slice(w.as_slice());
        bias[c] = -0.5 * dot(w.as_slice(), &means[c]) + (counts[c] as f64 / n as f64).ln();
    }
    Ok(Params::Lda { weights, bias })
}

impl TrainedClassifier {
    fn check_dim(&self, x: &[f64]) -> Result<(), ClassicError> {
        if x.len() != self.feature_dim {
            return Err(ClassicError::DimMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// One score per entry of `class_labels`.
    ///
    /// KNN: neighbour vote fractions. Tree and forest: leaf class
    /// frequencies (averaged over trees). LDA: posterior probabilities.
    /// SVM: signed one-vs-rest margins.
    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>, ClassicError> {
        self.check_dim(x)?;
        let nc = self.n_classes();
        let scores = match &self.params {
            Params::Knn { k, x: train, y } => {
                let mut order: Vec<(f64, usize)> = (0..train.rows()).map(|i| (sq_dist(train.row(i), x), i)).collect();
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut votes = vec![0.0; nc];
                for &(_, i) in order.iter().take(*k) {
                    votes[y[i]] += 1.0;
                }
                votes.iter_mut().for_each(|v| *v /= *k as f64);
                votes
            }
            Params::Tree(t) => t.leaf_dist(x).to_vec(),
            Params::Forest(trees) => {
                let mut acc = vec![0.0; nc];
                for t in trees {
                    for (a, p) in acc.iter_mut().zip(t.leaf_dist(x)) {
                        *a += p;
                    }
                }
                acc.iter_mut().for_each(|v| *v /= trees.len() as f64);
                acc
            }
            Params::Lda { weights, bias } => {
                let disc: Vec<f64> = (0..nc).map(|c| dot(weights.row(c), x) + bias[c]).collect();
                let m = disc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = disc.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            }
            Params::SvmLinear { weights } => (0..nc)
                .map(|c| {
                    let w = weights.row(c);
                    dot(&w[..x.len()], x) + w[x.len()]
                })
                .collect(),
            Params::SvmRbf { gamma, support, coef } => {
                let kx: Vec<f64> = (0..support.rows())
                    .map(|i| kernel(SvmKernel::Rbf, *gamma, support.row(i), x))
                    .collect();
                (0..nc).map(|c| dot(coef.row(c), &kx)).collect()
            }
        };
        Ok(scores)
    }

    /// Label with the highest score; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize, ClassicError> {
        let s = self.predict_scores(x)?;
        Ok(self.class_labels[argmax_first(&s)])
    }

    /// Trees of a tree or forest model.
    pub fn trees(&self) -> &[Tree] {
        match &self.params {
            Params::Tree(t) => std::slice::from_ref(t),
            Params::Forest(ts) => ts,
            _ => &[],
        }
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), ClassicError> {
        writeln!(w, "{MODEL_MAGIC}")?;
        serde_json::to_writer(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn load<R: BufRead>(mut r: R) -> Result<Self, ClassicError> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        if header.trim_end() != MODEL_MAGIC {
            return Err(ClassicError::Format(format!(
                "expected header {MODEL_MAGIC}, found {:?}",
                header.trim_end()
            )));
        }
        Ok(serde_json::from_reader(r)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Matrix, Vec<usize>) {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        (x, vec![0, 0, 1, 1])
    }

    fn accuracy(m: &TrainedClassifier, x: &Matrix, y: &[usize]) -> f64 {
        let hits = (0..x.rows()).filter(|&i| m.predict(x.row(i)).unwrap() == y[i]).count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn xor_linear_vs_rbf() {
        let (x, y) = xor();
        let mut spec = ClassifierSpec::new(ClassifierKind::Svm);
        spec.svm_kernel = SvmKernel::Linear;
        assert!(accuracy(&fit(&spec, &x, &y).unwrap(), &x, &y) <= 0.75);
        spec.svm_kernel = SvmKernel::Rbf;
        spec.rbf_gamma = Some(1.0);
        assert_eq!(accuracy(&fit(&spec, &x, &y).unwrap(), &x, &y), 1.0);
    }

    #[test]
    fn knn_examples() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let mut spec = ClassifierSpec::new(ClassifierKind::Knn);
        spec.k_neighbors = 1;
        let m = fit(&spec, &x, &[0, 1]).unwrap();
        assert_eq!(m.predict(&[0.1, 0.0]).unwrap(), 0);

        let x = Matrix::from_rows(&[vec![0.0], vec![0.1], vec![0.3], vec![5.0]]);
        spec.k_neighbors = 3;
        let m = fit(&spec, &x, &[0, 0, 1, 1]).unwrap();
        let s = m.predict_scores(&[0.05]).unwrap();
        assert_eq!(s, vec![2.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn lda_symmetric_boundary_and_tie() {
        let x = Matrix::from_rows(&[vec![-1.5], vec![-1.0], vec![-0.5], vec![0.5], vec![1.0], vec![1.5]]);
        let y = [0, 0, 0, 1, 1, 1];
        let m = fit(&ClassifierSpec::new(ClassifierKind::Lda), &x, &y).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
        let s = m.predict_scores(&[0.0]).unwrap();
        assert_eq!(s[0], s[1]);
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
        assert_eq!(m.predict(&[0.1]).unwrap(), 1);
        assert_eq!(m.predict(&[-0.1]).unwrap(), 0);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tree_threshold_and_pure_leaves() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![7.0], vec![8.0]]);
        let y = [0, 0, 0, 1, 1];
        let m = fit(&ClassifierSpec::new(ClassifierKind::DecisionTree), &x, &y).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
        assert_eq!(m.predict(&[4.9]).unwrap(), 0);
        assert_eq!(m.predict(&[5.1]).unwrap(), 1);
        assert_eq!(m.predict(&[100.0]).unwrap(), 1);
        assert!(m.trees()[0].leaf_impurities().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            fit(&ClassifierSpec::new(ClassifierKind::Knn), &x, &[1, 1]),
            Err(ClassicError::SingleClass)
        ));
        let m = fit(&ClassifierSpec::new(ClassifierKind::Knn), &x, &[0, 1]).unwrap();
        assert!(matches!(
            m.predict(&[0.0, 1.0]),
            Err(ClassicError::DimMismatch { expected: 1, got: 2 })
        ));
        let mut spec = ClassifierSpec::new(ClassifierKind::Svm);
        spec.svm_c = -1.0;
        assert!(matches!(fit(&spec, &x, &[0, 1]), Err(ClassicError::Hyperparameter(_))));
    }
}
