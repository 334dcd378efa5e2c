use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rfaffect_core::{seed, Matrix};
use serde::{Deserialize, Serialize};

use crate::layers::{self, Cache, LayerSpec};
use crate::tensor::Tensor;
use crate::NnError;

pub const CHECKPOINT_MAGIC: &str = "RFAFFECT-NN-v1";

/// Input branches joined by a head. The head starts with
/// [`LayerSpec::Concat`] and ends with [`LayerSpec::SoftmaxXent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_shapes: Vec<Vec<usize>>,
    pub branches: Vec<Vec<LayerSpec>>,
    pub head: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq)]
struct Placed {
    spec: LayerSpec,
    offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    branches: Vec<Vec<Placed>>,
    head: Vec<Placed>,
    /// Output width of each branch, in concat order.
    branch_widths: Vec<usize>,
    pub params: Vec<f64>,
    n_classes: usize,
}

/// Per-layer caches of one forward pass.
pub struct Trace {
    branches: Vec<Vec<Cache>>,
    head: Vec<Cache>,
    pub probs: Vec<f64>,
}

impl Trace {
    /// ReLU sign patterns and pooling winners of the whole pass.
    pub fn kink_signature(&self, model: &Model) -> Vec<u64> {
        let mut sig = Vec::new();
        for (layers, caches) in model.branches.iter().zip(&self.branches) {
            for (l, c) in layers.iter().zip(caches) {
                c.kink_signature(&l.spec, &mut sig);
            }
        }
        for (l, c) in model.head.iter().zip(&self.head) {
            c.kink_signature(&l.spec, &mut sig);
        }
        sig
    }
}

impl Model {
    /// Validates shapes through every branch and lays out parameters
    /// (all zero until [`Model::initialize`]).
    pub fn build(arch: Architecture) -> Result<Self, NnError> {
        if arch.branches.is_empty() || arch.branches.len() != arch.input_shapes.len() {
            return Err(NnError::Shape(format!(
                "{} branches for {} inputs",
                arch.branches.len(),
                arch.input_shapes.len()
            )));
        }
        if arch.head.first() != Some(&LayerSpec::Concat) || arch.head.last() != Some(&LayerSpec::SoftmaxXent) {
            return Err(NnError::Shape(
                "head must start with concat and end with softmax_xent".into(),
            ));
        }
        let mut offset = 0;
        let mut place = |spec: &LayerSpec| {
            let p = Placed {
                spec: spec.clone(),
                offset,
            };
            offset += spec.n_params();
            p
        };
        let mut branches = Vec::new();
        let mut widths = Vec::new();
        for (b, (layers, shape)) in arch.branches.iter().zip(&arch.input_shapes).enumerate() {
            let mut s = shape.clone();
            let mut placed = Vec::new();
            for spec in layers {
                if matches!(spec, LayerSpec::Concat | LayerSpec::SoftmaxXent) {
                    return Err(NnError::Shape(format!(
                        "branch {b}: {} only allowed in the head",
                        spec.name()
                    )));
                }
                s = spec
                    .output_shape(&s)
                    .map_err(|e| NnError::Shape(format!("branch {b}: {e}")))?;
                placed.push(place(spec));
            }
            if s.len() != 1 {
                return Err(NnError::Shape(format!(
                    "branch {b} ends in shape {s:?}; flatten it first"
                )));
            }
            widths.push(s[0]);
            branches.push(placed);
        }
        let mut s = vec![widths.iter().sum::<usize>()];
        let mut head = vec![place(&LayerSpec::Concat)];
        for spec in &arch.head[1..] {
            if spec == &LayerSpec::Concat {
                return Err(NnError::Shape("second concat in head".into()));
            }
            s = spec
                .output_shape(&s)
                .map_err(|e| NnError::Shape(format!("head: {e}")))?;
            head.push(place(spec));
        }
        let n_classes = s[0];
        Ok(Self {
            arch,
            branches,
            head,
            branch_widths: widths,
            params: vec![0.0; offset],
            n_classes,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn layers(&self) -> impl Iterator<Item = &Placed> {
        self.branches.iter().flatten().chain(&self.head)
    }

    /// Glorot uniform weights `+-sqrt(6 / (fan_in + fan_out))`, zero biases,
    /// LSTM forget-gate bias 1.
    pub fn initialize(&mut self, seed: u64) {
        let mut rng = seed::rng(seed);
        let mut params = vec![0.0; self.params.len()];
        for l in self.layers() {
            let n = l.spec.n_params();
            if n == 0 {
                continue;
            }
            let (fan_in, fan_out) = l.spec.fans();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let block = &mut params[l.offset..l.offset + n];
            let n_bias = match l.spec {
                LayerSpec::Conv1d { out_ch, .. } | LayerSpec::Conv2d { out_ch, .. } => out_ch,
                LayerSpec::Dense { output, .. } => output,
                LayerSpec::Lstm { hidden, .. } => 4 * hidden,
                _ => 0,
            };
            for v in &mut block[..n - n_bias] {
                *v = rng.random_range(-limit..limit);
            }
            if let LayerSpec::Lstm { hidden, .. } = l.spec {
                let bias = &mut block[n - n_bias..];
                bias[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
            }
        }
        self.params = params;
    }

    fn check_inputs(&self, inputs: &[Tensor]) -> Result<(), NnError> {
        if inputs.len() != self.arch.input_shapes.len() {
            return Err(NnError::Shape(format!(
                "model takes {} inputs, got {}",
                self.arch.input_shapes.len(),
                inputs.len()
            )));
        }
        for (i, (t, s)) in inputs.iter().zip(&self.arch.input_shapes).enumerate() {
            if &t.shape != s {
                return Err(NnError::Shape(format!(
                    "input {i} has shape {:?}, expected {s:?}",
                    t.shape
                )));
            }
        }
        Ok(())
    }

    pub fn forward_with(&self, params: &[f64], inputs: &[Tensor]) -> Result<Trace, NnError> {
        self.check_inputs(inputs)?;
        let mut branch_caches = Vec::with_capacity(self.branches.len());
        let mut joined = Vec::new();
        for (layers, x0) in self.branches.iter().zip(inputs) {
            let mut x = x0.clone();
            let mut caches = Vec::with_capacity(layers.len());
            for l in layers {
                let p = &params[l.offset..l.offset + l.spec.n_params()];
                let (y, c) = layers::forward(&l.spec, p, &x);
                caches.push(c);
                x = y;
            }
            joined.extend_from_slice(&x.data);
            branch_caches.push(caches);
        }
        let mut x = Tensor::vector(joined);
        let mut head_caches = vec![Cache::None];
        for l in &self.head[1..] {
            let p = &params[l.offset..l.offset + l.spec.n_params()];
            let (y, c) = layers::forward(&l.spec, p, &x);
            head_caches.push(c);
            x = y;
        }
        if !x.is_finite() {
            return Err(NnError::NonFinite("forward pass produced non-finite outputs".into()));
        }
        Ok(Trace {
            branches: branch_caches,
            head: head_caches,
            probs: x.data,
        })
    }

    /// Class probabilities.
    pub fn forward(&self, inputs: &[Tensor]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_with(&self.params, inputs)?.probs)
    }

    /// `[B, n_classes]` probabilities.
    pub fn predict_batch(&self, batch: &[Vec<Tensor>]) -> Result<Matrix, NnError> {
        let rows = batch.iter().map(|x| self.forward(x)).collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_rows(&rows))
    }

    fn check_label(&self, label: usize) -> Result<(), NnError> {
        if label >= self.n_classes {
            return Err(NnError::Label {
                label,
                n_classes: self.n_classes,
            });
        }
        Ok(())
    }

    /// Cross-entropy `-ln p[label]` at `params`.
    pub fn loss_with(&self, params: &[f64], inputs: &[Tensor], label: usize) -> Result<f64, NnError> {
        self.check_label(label)?;
        let t = self.forward_with(params, inputs)?;
        Ok(-t.probs[label].ln())
    }

    /// Loss and its gradient, accumulated into `grads`.
    pub fn loss_and_grad(&self, inputs: &[Tensor], label: usize, grads: &mut [f64]) -> Result<f64, NnError> {
        self.check_label(label)?;
        let trace = self.forward_with(&self.params, inputs)?;
        let loss = -trace.probs[label].ln();
        let mut g = trace.probs.clone();
        g[label] -= 1.0;
        let mut grad = Tensor::vector(g);
        for (l, c) in self.head.iter().zip(&trace.head).skip(1).rev() {
            let n = l.spec.n_params();
            grad = layers::backward(
                &l.spec,
                &self.params[l.offset..l.offset + n],
                c,
                &grad,
                &mut grads[l.offset..l.offset + n],
            );
        }
        let mut start = 0;
        for ((layers, caches), &w) in self.branches.iter().zip(&trace.branches).zip(&self.branch_widths) {
            let mut gb = Tensor::vector(grad.data[start..start + w].to_vec());
            start += w;
            for (l, c) in layers.iter().zip(caches).rev() {
                let n = l.spec.n_params();
                gb = layers::backward(
                    &l.spec,
                    &self.params[l.offset..l.offset + n],
                    c,
                    &gb,
                    &mut grads[l.offset..l.offset + n],
                );
            }
        }
        Ok(loss)
    }

    /// Parameter index ranges of every layer kind that has parameters.
    pub fn param_ranges_by_kind(&self) -> BTreeMap<&'static str, Vec<std::ops::Range<usize>>> {
        let mut m: BTreeMap<&'static str, Vec<_>> = BTreeMap::new();
        for l in self.layers() {
            let n = l.spec.n_params();
            if n > 0 {
                m.entry(l.spec.name()).or_default().push(l.offset..l.offset + n);
            }
        }
        m
    }

    /// Writes the header line, the architecture as one JSON line, then the
    /// parameter count and values as little-endian `u64` / `f64`.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), NnError> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "{}", serde_json::to_string(&self.arch)?)?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in &self.params {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(mut r: R) -> Result<Self, NnError> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint(format!(
                "expected header {CHECKPOINT_MAGIC}, found {:?}",
                line.trim_end()
            )));
        }
        line.clear();
        r.read_line(&mut line)?;
        let arch: Architecture = serde_json::from_str(line.trim_end())?;
        let mut model = Model::build(arch)?;
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf) as usize;
        if n != model.params.len() {
            return Err(NnError::Checkpoint(format!(
                "{n} stored parameters, architecture needs {}",
                model.params.len()
            )));
        }
        for v in model.params.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(model)
    }
}

// ---------------------------------------------------------------------------
// Gradient check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindCheck {
    pub kind: String,
    pub checked: usize,
    /// Parameters whose finite difference crossed a ReLU or pooling kink.
    pub skipped_kinks: usize,
    /// Parameters whose gradient is below the finite-difference resolution.
    pub skipped_unresolved: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Gradients smaller than this were not compared.
    pub resolution: f64,
    pub per_kind: Vec<KindCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    /// Parameters compared per layer kind (fewer if the kind has fewer).
    pub per_kind: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            per_kind: 200,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

pub const GRADCHECK_STEP: f64 = 1e-5;

/// Central differences against the analytic gradient on up to
/// `cfg.per_kind` randomly drawn parameters of every parameterized layer
/// kind. Relative error is `|ga - gn| / max(|ga|, |gn|, 1e-12)`.
///
/// Two kinds of draws are replaced by fresh ones and counted separately:
///
/// * the `+h` or `-h` evaluation changes a ReLU sign or pooling winner, so
///   the loss is not differentiable at that scale;
/// * the two differ and `max(|ga|, |gn|)` is below `eps * max(|L|, 1) / (h * tolerance)`, the
///   magnitude at which rounding in the two loss evaluations alone exceeds
///   the tolerance.
pub fn gradient_check(
    model: &Model,
    inputs: &[Tensor],
    label: usize,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let mut analytic = vec![0.0; model.n_params()];
    let loss = model.loss_and_grad(inputs, label, &mut analytic)?;
    let resolution = f64::EPSILON * loss.abs().max(1.0) / (GRADCHECK_STEP * cfg.tolerance);
    let base_sig = model.forward_with(&model.params, inputs)?.kink_signature(model);
    let mut rng = seed::rng(cfg.seed);
    let mut params = model.params.clone();
    let mut per = Vec::new();
    let mut overall: f64 = 0.0;
    for (kind, ranges) in model.param_ranges_by_kind() {
        let pool: Vec<usize> = ranges.into_iter().flatten().collect();
        let order = sample_indices(&mut rng, pool.len(), pool.len()).into_vec();
        let mut check = KindCheck {
            kind: kind.to_string(),
            checked: 0,
            skipped_kinks: 0,
            skipped_unresolved: 0,
            max_rel_error: 0.0,
        };
        for &k in &order {
            if check.checked >= cfg.per_kind {
                break;
            }
            let i = pool[k];
            let orig = params[i];
            params[i] = orig + GRADCHECK_STEP;
            let plus = model.forward_with(&params, inputs)?;
            params[i] = orig - GRADCHECK_STEP;
            let minus = model.forward_with(&params, inputs)?;
            params[i] = orig;
            if plus.kink_signature(model) != base_sig || minus.kink_signature(model) != base_sig {
                check.skipped_kinks += 1;
                continue;
            }
            let numeric = (-plus.probs[label].ln() + minus.probs[label].ln()) / (2.0 * GRADCHECK_STEP);
            let ga = analytic[i];
            if ga != numeric && ga.abs().max(numeric.abs()) < resolution {
                check.skipped_unresolved += 1;
                continue;
            }
            let rel = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-12);
            check.max_rel_error = check.max_rel_error.max(rel);
            check.checked += 1;
        }
        overall = overall.max(check.max_rel_error);
        per.push(check);
    }
    Ok(GradCheckReport {
        max_rel_error: overall,
        tolerance: cfg.tolerance,
        resolution,
        per_kind: per,
    })
}

// ---------------------------------------------------------------------------
// Architectures

/// Sizes of the Y-shaped RF network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfModelConfig {
    pub conv1d_kernel: usize,
    pub conv2d_kernel: usize,
    pub filters: [usize; 2],
    pub lstm_hidden: usize,
}

impl Default for RfModelConfig {
    fn default() -> Self {
        Self {
            conv1d_kernel: 7,
            conv2d_kernel: 3,
            filters: [32, 64],
            lstm_hidden: 64,
        }
    }
}

fn image_branch(in_ch: usize, filters: [usize; 2], kernel: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d {
            in_ch,
            out_ch: filters[0],
            kernel,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { size: 2, stride: 2 },
        LayerSpec::Conv2d {
            in_ch: filters[0],
            out_ch: filters[1],
            kernel,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { size: 2, stride: 2 },
        LayerSpec::Flatten,
    ]
}

fn image_flat_width(hw: (usize, usize), filters: [usize; 2], kernel: usize) -> Result<usize, NnError> {
    let mut s = vec![1, hw.0, hw.1];
    for spec in image_branch(1, filters, kernel) {
        s = spec.output_shape(&s)?;
    }
    Ok(s[0])
}

/// Y-shaped fusion network with an explicit size configuration.
///
/// Branch A on `[signal_len, channels]`: conv1d, relu, maxpool, conv1d,
/// relu, maxpool, LSTM (final hidden state). Branch B on `[1, H, W]`:
/// conv2d, relu, maxpool, conv2d, relu, maxpool, flatten. The head is
/// dense to `n_classes` followed by softmax.
pub fn build_rf_model_with(
    signal_len: usize,
    channels: usize,
    image_hw: (usize, usize),
    n_classes: usize,
    cfg: &RfModelConfig,
) -> Result<Model, NnError> {
    let flat = image_flat_width(image_hw, cfg.filters, cfg.conv2d_kernel)?;
    let arch = Architecture {
        input_shapes: vec![vec![signal_len, channels], vec![1, image_hw.0, image_hw.1]],
        branches: vec![
            vec![
                LayerSpec::Conv1d {
                    in_ch: channels,
                    out_ch: cfg.filters[0],
                    kernel: cfg.conv1d_kernel,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { size: 2, stride: 2 },
                LayerSpec::Conv1d {
                    in_ch: cfg.filters[0],
                    out_ch: cfg.filters[1],
                    kernel: cfg.conv1d_kernel,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { size: 2, stride: 2 },
                LayerSpec::Lstm {
                    input: cfg.filters[1],
                    hidden: cfg.lstm_hidden,
                },
            ],
            image_branch(1, cfg.filters, cfg.conv2d_kernel),
        ],
        head: vec![
            LayerSpec::Concat,
            LayerSpec::Dense {
                input: cfg.lstm_hidden + flat,
                output: n_classes,
            },
            LayerSpec::SoftmaxXent,
        ],
    };
    let mut m = Model::build(arch)?;
    m.initialize(0);
    Ok(m)
}

/// [`build_rf_model_with`] at the default sizes (kernels 7 and 3x3, 32 and
/// 64 filters, 64 LSTM units).
pub fn build_rf_model(
    signal_len: usize,
    channels: usize,
    image_hw: (usize, usize),
    n_classes: usize,
) -> Result<Model, NnError> {
    build_rf_model_with(signal_len, channels, image_hw, n_classes, &RfModelConfig::default())
}

/// Width of the dense layer applied to the ECG feature vector.
pub const ECG_FEATURE_UNITS: usize = 32;

/// ECG network: the conv2d image branch plus a feature branch
/// (dense to 32, relu), concatenated into a dense softmax head.
pub fn build_ecg_model_with(
    image_hw: (usize, usize),
    n_features: usize,
    n_classes: usize,
    filters: [usize; 2],
) -> Result<Model, NnError> {
    let flat = image_flat_width(image_hw, filters, 3)?;
    let arch = Architecture {
        input_shapes: vec![vec![1, image_hw.0, image_hw.1], vec![n_features]],
        branches: vec![
            image_branch(1, filters, 3),
            vec![
                LayerSpec::Dense {
                    input: n_features,
                    output: ECG_FEATURE_UNITS,
                },
                LayerSpec::Relu,
            ],
        ],
        head: vec![
            LayerSpec::Concat,
            LayerSpec::Dense {
                input: flat + ECG_FEATURE_UNITS,
                output: n_classes,
            },
            LayerSpec::SoftmaxXent,
        ],
    };
    let mut m = Model::build(arch)?;
    m.initialize(0);
    Ok(m)
}

pub fn build_ecg_model(image_hw: (usize, usize), n_features: usize, n_classes: usize) -> Result<Model, NnError> {
    build_ecg_model_with(image_hw, n_features, n_classes, [32, 64])
}
